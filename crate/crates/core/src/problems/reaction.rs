//! Chemical Langevin problems described by a small line-oriented text
//! format.
//!
//! A network file looks like
//!
//! ```text
//! # dimerization, one fast reaction
//! species 2
//! rate 5.0 | orders 2 0 | stoich -2 1
//! rate 0.2 | orders 0 1 | stoich 2 -1
//! fast 1
//! ```
//!
//! `species N` comes first, then one line per reaction, then `fast r`
//! marking the first `r` reactions as the fast drift part. Blank lines and
//! `#` comments are ignored; anything else, including extra tokens on a
//! line or content after `fast`, is rejected with its line number.

use std::sync::Arc;

use crate::error::{Result, SolverError};
use crate::problem::{DiffusionSpec, DriftPair, SplitSdeProblem};

/// One reaction channel: mass-action propensity
/// `a(x) = rate * prod_i x_i^orders_i`, state change `stoich`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub rate: f64,
    pub orders: Vec<u32>,
    pub stoich: Vec<i32>,
}

/// A reaction system with the first `fast_count` reactions forming the fast
/// drift part. Ordering is taken from the file as written, not inferred.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    pub n_species: usize,
    pub reactions: Vec<Reaction>,
    pub fast_count: usize,
    /// Evaluate propensities with falling factorials
    /// `x (x-1) ... (x-o+1)` instead of plain powers. Off by default.
    pub falling_factorial: bool,
}

fn parse_err(line: usize, message: impl Into<String>) -> SolverError {
    SolverError::Parse { line, message: message.into() }
}

fn parse_counts<T: std::str::FromStr>(
    tokens: &[&str],
    expected: usize,
    what: &str,
    line: usize,
) -> Result<Vec<T>> {
    if tokens.len() != expected {
        return Err(parse_err(
            line,
            format!("expected {expected} {what} entries, found {}", tokens.len()),
        ));
    }
    tokens
        .iter()
        .map(|t| t.parse::<T>().map_err(|_| parse_err(line, format!("bad {what} entry '{t}'"))))
        .collect()
}

/// Parses the network format described at module level.
pub fn parse_reaction_network(text: &str) -> Result<ReactionNetwork> {
    let mut n_species: Option<usize> = None;
    let mut reactions: Vec<Reaction> = Vec::new();
    let mut fast_count: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if fast_count.is_some() {
            return Err(parse_err(line, "content after the 'fast' line"));
        }
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("species") => {
                if n_species.is_some() {
                    return Err(parse_err(line, "duplicate 'species' line"));
                }
                if !reactions.is_empty() {
                    return Err(parse_err(line, "'species' must come before reactions"));
                }
                let n = tokens
                    .next()
                    .ok_or_else(|| parse_err(line, "missing species count"))?
                    .parse::<usize>()
                    .map_err(|_| parse_err(line, "species count must be a positive integer"))?;
                if n == 0 {
                    return Err(parse_err(line, "species count must be at least 1"));
                }
                if tokens.next().is_some() {
                    return Err(parse_err(line, "trailing tokens after species count"));
                }
                n_species = Some(n);
            }
            Some("rate") => {
                let n =
                    n_species.ok_or_else(|| parse_err(line, "'species' line must come first"))?;
                let segments: Vec<&str> = content.split('|').map(str::trim).collect();
                if segments.len() != 3 {
                    return Err(parse_err(
                        line,
                        "reaction line needs 'rate k | orders ... | stoich ...'",
                    ));
                }
                let rate_tokens: Vec<&str> = segments[0].split_whitespace().collect();
                if rate_tokens.len() != 2 || rate_tokens[0] != "rate" {
                    return Err(parse_err(line, "first segment must be 'rate k'"));
                }
                let rate: f64 = rate_tokens[1]
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad rate '{}'", rate_tokens[1])))?;
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(parse_err(line, format!("rate must be positive, got {rate}")));
                }
                let order_tokens: Vec<&str> = segments[1].split_whitespace().collect();
                if order_tokens.first() != Some(&"orders") {
                    return Err(parse_err(line, "second segment must start with 'orders'"));
                }
                let orders: Vec<u32> = parse_counts(&order_tokens[1..], n, "orders", line)?;
                let stoich_tokens: Vec<&str> = segments[2].split_whitespace().collect();
                if stoich_tokens.first() != Some(&"stoich") {
                    return Err(parse_err(line, "third segment must start with 'stoich'"));
                }
                let stoich: Vec<i32> = parse_counts(&stoich_tokens[1..], n, "stoich", line)?;
                reactions.push(Reaction { rate, orders, stoich });
            }
            Some("fast") => {
                if n_species.is_none() {
                    return Err(parse_err(line, "'species' line must come first"));
                }
                let r = tokens
                    .next()
                    .ok_or_else(|| parse_err(line, "missing fast reaction count"))?
                    .parse::<usize>()
                    .map_err(|_| parse_err(line, "fast count must be a non-negative integer"))?;
                if tokens.next().is_some() {
                    return Err(parse_err(line, "trailing tokens after fast count"));
                }
                if r > reactions.len() {
                    return Err(parse_err(
                        line,
                        format!("fast count {r} exceeds {} reactions", reactions.len()),
                    ));
                }
                fast_count = Some(r);
            }
            Some(other) => {
                return Err(parse_err(line, format!("unrecognized directive '{other}'")));
            }
            None => unreachable!("blank lines are skipped"),
        }
    }

    let n_species = n_species.ok_or_else(|| parse_err(0, "missing 'species' line"))?;
    if reactions.is_empty() {
        return Err(parse_err(0, "network has no reactions"));
    }
    let fast_count = fast_count.ok_or_else(|| parse_err(0, "missing 'fast' line"))?;
    Ok(ReactionNetwork { n_species, reactions, fast_count, falling_factorial: false })
}

impl ReactionNetwork {
    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    /// Propensity of reaction `j` at state `x` (may be negative off the
    /// nonnegative orthant; diffusion clamps, drift does not).
    pub fn propensity(&self, j: usize, x: &[f64]) -> f64 {
        let r = &self.reactions[j];
        let mut a = r.rate;
        for (i, &o) in r.orders.iter().enumerate() {
            if self.falling_factorial {
                for q in 0..o {
                    a *= x[i] - q as f64;
                }
            } else {
                a *= x[i].powi(o as i32);
            }
        }
        a
    }

    /// Sum of `stoich_j * a_j(x)` over reactions in `range`.
    fn drift_part(&self, range: std::ops::Range<usize>, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for j in range {
            let a = self.propensity(j, x);
            for (o, &v) in out.iter_mut().zip(&self.reactions[j].stoich) {
                *o += v as f64 * a;
            }
        }
    }

    /// Builds the Langevin problem: drift `sum_j stoich_j a_j(x)` split at
    /// `fast_count`, matrix diffusion with columns
    /// `stoich_j sqrt(max(a_j(x), 0))`. The caller supplies the initial
    /// state and horizon; the file format does not carry them.
    pub fn into_problem(self, x0: Vec<f64>, horizon: f64) -> Result<SplitSdeProblem> {
        if x0.len() != self.n_species {
            return Err(SolverError::dim(format!(
                "initial state has {} entries for {} species",
                x0.len(),
                self.n_species
            )));
        }
        let n = self.n_species;
        let l = self.n_reactions();
        let r = self.fast_count;
        let name = format!("reaction-network({n} species, {l} reactions, {r} fast)");
        let net = Arc::new(self);
        let fast_net = Arc::clone(&net);
        let slow_net = Arc::clone(&net);
        let diff_net = Arc::clone(&net);
        let problem = SplitSdeProblem {
            name,
            drift: DriftPair::new(
                n,
                move |_, y: &[f64], out: &mut [f64]| fast_net.drift_part(0..r, y, out),
                move |_, y: &[f64], out: &mut [f64]| slow_net.drift_part(r..l, y, out),
            ),
            diffusion: DiffusionSpec::matrix(n, l, move |_, x: &[f64], out: &mut [f64]| {
                for j in 0..l {
                    let root = diff_net.propensity(j, x).max(0.0).sqrt();
                    for (i, &v) in diff_net.reactions[j].stoich.iter().enumerate() {
                        out[j * n + i] = v as f64 * root;
                    }
                }
            }),
            x0,
            horizon,
            exact: None,
            weak_functional: Some(Box::new(|x: &[f64]| x[0])),
        };
        problem.validate()?;
        Ok(problem)
    }
}

/// Reads a network file and assembles the problem. Initial state and
/// horizon come from the caller.
pub fn load_reaction_network(
    path: &std::path::Path,
    x0: Vec<f64>,
    horizon: f64,
) -> Result<SplitSdeProblem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SolverError::invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_reaction_network(&text)?.into_problem(x0, horizon)
}
