//! Three-valued decision tree over intention symbols.
//!
//! Symbols are numbered `1..=n`. Each may carry external assertions of
//! truth and of falsity; the derivation chain is
//! `observed → assumed → known`, with `unknown` for symbols carrying no
//! assertion or both (a contradiction). While anything is unknown the
//! lowest-ordered unknown symbol is queried, otherwise an intent label is
//! emitted.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("symbol {symbol} is outside 1..={n}")]
    UnknownSymbol { symbol: usize, n: usize },
    #[error("order must be a permutation of 1..={0}")]
    BadOrder(usize),
    #[error("a tree needs at least one symbol")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolStatus {
    Unknown,
    Contradiction,
    Known(bool),
}

/// Intention label such as `op_11`: digits from symbol `n` down to 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntentLabel(pub String);

impl IntentLabel {
    pub fn from_values(values: &[bool]) -> Self {
        let digits: String = values.iter().rev().map(|&v| if v { '1' } else { '0' }).collect();
        IntentLabel(format!("op_{digits}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalOutcome {
    /// Every symbol is known; `values[k]` is symbol `k + 1`.
    Intent { label: IntentLabel, values: Vec<bool> },
    Query {
        symbol: usize,
        unknown: Vec<usize>,
        contradictions: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTree {
    order: Vec<usize>,
    /// `(asserted true, asserted false)` per symbol.
    externals: Vec<(bool, bool)>,
}

impl DecisionTree {
    /// `order` lists the symbols from first to last asked; `None` asks in
    /// ascending symbol order.
    pub fn new(n: usize, order: Option<Vec<usize>>) -> Result<Self, TreeError> {
        if n == 0 {
            return Err(TreeError::Empty);
        }
        let order = order.unwrap_or_else(|| (1..=n).collect());
        let mut seen = vec![false; n + 1];
        if order.len() != n {
            return Err(TreeError::BadOrder(n));
        }
        for &s in &order {
            if s == 0 || s > n || seen[s] {
                return Err(TreeError::BadOrder(n));
            }
            seen[s] = true;
        }
        Ok(Self {
            order,
            externals: vec![(false, false); n],
        })
    }

    pub fn symbol_count(&self) -> usize {
        self.externals.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    fn slot(&mut self, symbol: usize) -> Result<&mut (bool, bool), TreeError> {
        let n = self.symbol_count();
        if symbol == 0 || symbol > n {
            return Err(TreeError::UnknownSymbol { symbol, n });
        }
        Ok(&mut self.externals[symbol - 1])
    }

    pub fn assign(&mut self, symbol: usize, value: bool) -> Result<(), TreeError> {
        let slot = self.slot(symbol)?;
        if value {
            slot.0 = true;
        } else {
            slot.1 = true;
        }
        Ok(())
    }

    /// Drops every external assertion on `symbol`.
    pub fn release(&mut self, symbol: usize) -> Result<(), TreeError> {
        *self.slot(symbol)? = (false, false);
        Ok(())
    }

    pub fn status(&self, symbol: usize) -> SymbolStatus {
        match self.externals[symbol - 1] {
            (true, true) => SymbolStatus::Contradiction,
            (false, false) => SymbolStatus::Unknown,
            (observed_true, observed_false) => {
                // assumed(S, ¬⊥) needs the absence of a falsity assertion,
                // and symmetrically for ¬⊤; known follows from observed
                // plus assumed.
                let assumed_true = !observed_false;
                let assumed_false = !observed_true;
                let known_true = observed_true && assumed_true;
                let known_false = observed_false && assumed_false;
                debug_assert!(!(known_true && known_false));
                SymbolStatus::Known(known_true)
            }
        }
    }

    pub fn statuses(&self) -> Vec<SymbolStatus> {
        (1..=self.symbol_count()).map(|s| self.status(s)).collect()
    }

    /// Asserted facts, one `(symbol, value)` per assertion in symbol order.
    pub fn assertions(&self) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        for (k, &(t, f)) in self.externals.iter().enumerate() {
            if t {
                out.push((k + 1, true));
            }
            if f {
                out.push((k + 1, false));
            }
        }
        out
    }

    pub fn eval(&self) -> EvalOutcome {
        let statuses = self.statuses();
        let unknown: Vec<usize> = (1..=statuses.len())
            .filter(|&s| !matches!(statuses[s - 1], SymbolStatus::Known(_)))
            .collect();
        if unknown.is_empty() {
            let values: Vec<bool> = statuses
                .iter()
                .map(|s| match s {
                    SymbolStatus::Known(v) => *v,
                    _ => unreachable!(),
                })
                .collect();
            return EvalOutcome::Intent {
                label: IntentLabel::from_values(&values),
                values,
            };
        }
        let contradictions = (1..=statuses.len())
            .filter(|&s| statuses[s - 1] == SymbolStatus::Contradiction)
            .collect();
        let symbol = *self
            .order
            .iter()
            .find(|s| unknown.contains(s))
            .expect("order covers every symbol");
        EvalOutcome::Query {
            symbol,
            unknown,
            contradictions,
        }
    }
}
