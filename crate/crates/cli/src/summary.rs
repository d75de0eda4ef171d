//! `key = value` summaries that are also valid TOML.

use std::fmt::Write as _;

use hyperff::io::num;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    lines: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: &str) -> &mut Self {
        self.lines.push((key.into(), format!("{value:?}")));
        self
    }

    pub fn number(&mut self, key: &str, value: f64) -> &mut Self {
        self.lines.push((key.into(), num(value)));
        self
    }

    pub fn count(&mut self, key: &str, value: usize) -> &mut Self {
        self.lines.push((key.into(), value.to_string()));
        self
    }

    pub fn flag(&mut self, key: &str, value: bool) -> &mut Self {
        self.lines.push((key.into(), value.to_string()));
        self
    }

    pub fn numbers(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let items: Vec<String> = values.iter().map(|&v| num(v)).collect();
        self.lines.push((key.into(), format!("[{}]", items.join(", "))));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
