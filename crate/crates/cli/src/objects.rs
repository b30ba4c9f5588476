use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use porous_core::{CascadeMeasure, DyadicSet, MeasureSpec, SetSpec};

use crate::args::ObjectArgs;

pub enum Object {
    Measure(CascadeMeasure),
    Set(DyadicSet),
}

impl Object {
    pub fn arity_log(&self) -> u32 {
        match self {
            Object::Measure(m) => m.arity_log(),
            Object::Set(a) => a.arity_log(),
        }
    }
}

fn read_spec(field: &str, path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("{field}: cannot read `{}`", path.display()))
}

fn set_kind_lines(kind: &str) -> String {
    match kind {
        "even-digits-zero" => "kind = digit-constraint\nperiod = 2\nresidues = 0\ndigit = 0\n".into(),
        other => format!("kind = {other}\n"),
    }
}

impl ObjectArgs {
    fn spec_text(&self, base: String) -> Result<String> {
        let mut text = base;
        for p in &self.params {
            if !p.contains('=') {
                bail!("param: expected KEY=VALUE, got `{p}`");
            }
            text.push_str(p);
            text.push('\n');
        }
        Ok(text)
    }

    pub fn build(&self) -> Result<Object> {
        if let Some(path) = &self.set_spec {
            let text = self.spec_text(read_spec("set-spec", path)?)?;
            return Ok(Object::Set(SetSpec::parse(&text)?.build()?));
        }
        if let Some(kind) = &self.set {
            let text = self.spec_text(set_kind_lines(kind))?;
            return Ok(Object::Set(SetSpec::parse(&text)?.build()?));
        }
        self.build_measure().map(Object::Measure)
    }

    pub fn build_measure(&self) -> Result<CascadeMeasure> {
        if self.set.is_some() || self.set_spec.is_some() {
            bail!("measure: this subcommand needs a measure, not a set");
        }
        let base = match (&self.measure_spec, &self.measure) {
            (Some(path), _) => read_spec("measure-spec", path)?,
            (None, Some(kind)) => format!("kind = {kind}\n"),
            (None, None) => "kind = counterexample\n".into(),
        };
        Ok(MeasureSpec::parse(&self.spec_text(base)?)?.build()?)
    }
}
