//! Outcome of one exhaustive identity check.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    /// Number of instances evaluated.
    pub checked: usize,
    /// First failing instance, rendered in tree grammar.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }

    /// Runs `test` on every item in parallel. `test` returns `Some(text)` on
    /// failure; the failure reported is the first one in item order.
    pub fn run<T: Sync, F>(name: &str, items: &[T], test: F) -> Check
    where
        F: Fn(&T) -> Option<String> + Sync + Send,
    {
        Check { name: name.into(), checked: items.len(), counterexample: items.par_iter().find_map_first(test) }
    }

    /// Like [`Check::run`] for fallible tests; an error counts as a failure.
    pub fn try_run<T: Sync, F>(name: &str, items: &[T], test: F) -> Check
    where
        F: Fn(&T) -> crate::Result<Option<String>> + Sync + Send,
    {
        Self::run(name, items, |x| match test(x) {
            Ok(r) => r,
            Err(e) => Some(format!("error: {e}")),
        })
    }

    pub fn from_parts(name: &str, checked: usize, counterexample: Option<String>) -> Check {
        Check { name: name.into(), checked, counterexample }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.counterexample {
            None => write!(f, "PASS {} ({} instances)", self.name, self.checked),
            Some(c) => write!(f, "FAIL {} ({} instances): {c}", self.name, self.checked),
        }
    }
}
