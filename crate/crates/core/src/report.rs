//! Flat `key = value` text blocks used for reports and constants files.

use std::fmt::Display;

use crate::field_io::fmt17;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvBlock {
    entries: Vec<(String, String)>,
}

impl KvBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.entries.push((key.into(), fmt17(v)));
        self
    }

    pub fn flag(&mut self, key: impl Into<String>, v: bool) -> &mut Self {
        self.entries.push((key.into(), v.to_string()));
        self
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Display) -> &mut Self {
        self.entries.push((key.into(), v.to_string()));
        self
    }

    pub fn extend(&mut self, other: &KvBlock) -> &mut Self {
        self.entries.extend(other.entries.iter().cloned());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        KvBlock { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_parse() {
        let mut kv = KvBlock::new();
        kv.num("rho_eps", 0.375).flag("verdict", true).text("label", "laplace");
        let text = kv.render();
        assert_eq!(text, "rho_eps = 3.7500000000000000e-1\nverdict = true\nlabel = laplace\n");
        let back = KvBlock::parse(&text);
        assert_eq!(back, kv);
        assert_eq!(back.get("rho_eps").unwrap().parse::<f64>().unwrap(), 0.375);
    }
}
