//! Restriction records, file parsing, identifiability checks and the
//! candidate table driving the column search.
//!
//! A restriction file is CSV with header
//! `kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon`. Variable and shock
//! fields accept 1-based indices or names declared in an optional preamble
//! (`#variables: a,b,c` / `#shocks: x,y`). Pure sign records leave
//! `var_k`/`shock_l`/`lambda` empty; `horizon` defaults to 0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::var::IrfTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RestrictionKind {
    Sign,
    Ranking,
}

/// A single inequality restriction. Indices are 0-based internally.
///
/// A sign record requires `sign * f[var_i, shock_j, horizon] >= 0`; a ranking
/// record requires `sign * (f[var_i, shock_j, horizon] - lambda *
/// f[var_k, shock_l, horizon]) >= 0`. A ranking with lambda = 0 is normalized
/// to a sign record at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restriction {
    pub kind: RestrictionKind,
    pub var_i: usize,
    pub shock_j: usize,
    pub var_k: Option<usize>,
    pub shock_l: Option<usize>,
    pub sign: f64,
    pub lambda: f64,
    pub horizon: usize,
}

impl Restriction {
    fn is_single_shock(&self) -> bool {
        match self.kind {
            RestrictionKind::Sign => true,
            RestrictionKind::Ranking => self.shock_l == Some(self.shock_j),
        }
    }

    /// Evaluate `sign * (c[i] - lambda * c[k])` on an impact column for this
    /// shock. Only meaningful for single-shock horizon-0 records.
    #[inline]
    fn eval_column(&self, column: &DVector<f64>) -> f64 {
        match self.kind {
            RestrictionKind::Sign => self.sign * column[self.var_i],
            RestrictionKind::Ranking => {
                self.sign * (column[self.var_i] - self.lambda * column[self.var_k.unwrap()])
            }
        }
    }
}

/// How an impact column relates to one shock's restriction set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnFit {
    /// The column satisfies every restriction.
    Plus,
    /// The negated column satisfies every restriction.
    Minus,
    /// Both the column and its negation satisfy (exact zeros only).
    Both,
    Neither,
}

/// Candidate-table cell: which signed version of a column can represent a
/// shock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidacy {
    No,
    Plus,
    Minus,
    Both,
}

/// The m x n candidate table. Entry (j, i) records whether column i of
/// R = L*Q (or its negation) satisfies shock j's restrictions.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTable {
    pub m: usize,
    pub n: usize,
    entries: Vec<Candidacy>,
    /// True when every column has at most one non-`No` entry and no entry is
    /// `Both` — the precondition for the direct (non-enumerating) assignment.
    pub strict: bool,
}

impl CandidateTable {
    pub fn from_entries(m: usize, n: usize, entries: Vec<Candidacy>) -> Self {
        assert_eq!(entries.len(), m * n);
        let mut table = Self { m, n, entries, strict: false };
        table.strict = table.compute_strict();
        table
    }

    #[inline]
    pub fn entry(&self, j: usize, i: usize) -> Candidacy {
        self.entries[j * self.n + i]
    }

    fn compute_strict(&self) -> bool {
        for i in 0..self.n {
            let mut hits = 0;
            for j in 0..self.m {
                match self.entry(j, i) {
                    Candidacy::No => {}
                    Candidacy::Both => return false,
                    _ => hits += 1,
                }
            }
            if hits > 1 {
                return false;
            }
        }
        true
    }

    /// True if some shock has no candidate column at all, i.e. the pair must
    /// be rejected.
    pub fn has_empty_row(&self) -> bool {
        (0..self.m).any(|j| (0..self.n).all(|i| self.entry(j, i) == Candidacy::No))
    }
}

/// Witness distinguishing a pair of shocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Variable with equal-signed responses (condition 1) or the left side of
    /// the matched ranking pair (condition 2). 0-based.
    pub i1: usize,
    /// Variable with opposite-signed responses, or the right side of the
    /// ranking pair. 0-based.
    pub i2: usize,
    /// 1 or 2, the condition that distinguishes the pair.
    pub condition: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub shock_j: usize,
    pub shock_l: usize,
    pub witness: Option<Witness>,
}

/// Result of the identifiability check: one entry per shock pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub holds: bool,
    pub pairs: Vec<PairReport>,
}

/// A parsed, partitioned identification scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictionSet {
    pub n: usize,
    pub m: usize,
    pub variable_names: Vec<String>,
    pub shock_names: Vec<String>,
    /// Horizon-0 restrictions involving a single shock, grouped by shock.
    pub impact_single: Vec<Vec<Restriction>>,
    /// Horizon-0 ranking restrictions across two different shocks.
    pub cross_shock: Vec<Restriction>,
    /// Restrictions at horizons h > 0.
    pub dynamic: Vec<Restriction>,
}

impl RestrictionSet {
    /// Total number of stored restrictions.
    pub fn len(&self) -> usize {
        self.impact_single.iter().map(Vec::len).sum::<usize>()
            + self.cross_shock.len()
            + self.dynamic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the scheme contains only pure sign restrictions at impact
    /// (no ranking records of any kind at horizon 0).
    pub fn is_pure_sign(&self) -> bool {
        self.cross_shock.is_empty()
            && self
                .impact_single
                .iter()
                .flatten()
                .all(|r| r.kind == RestrictionKind::Sign)
    }

    /// Largest horizon appearing in the dynamic partition (0 if none).
    pub fn max_dynamic_horizon(&self) -> usize {
        self.dynamic.iter().map(|r| r.horizon).max().unwrap_or(0)
    }

    /// Grow the variable/shock space without adding restrictions. Useful for
    /// schemes that restrict only a leading block of a larger system.
    pub fn resize(&mut self, n: usize, m: usize) -> Result<()> {
        if n < self.n || m < self.m {
            return Err(Error::Dimension(format!(
                "cannot shrink a (n={}, m={}) set to (n={n}, m={m})",
                self.n, self.m
            )));
        }
        for i in self.n..n {
            self.variable_names.push(format!("V{}", i + 1));
        }
        for j in self.m..m {
            self.shock_names.push(format!("S{}", j + 1));
            self.impact_single.push(Vec::new());
        }
        self.n = n;
        self.m = m;
        Ok(())
    }

    /// Error unless every shock carries at least one impact restriction.
    pub fn validate_strict(&self) -> Result<()> {
        for (j, recs) in self.impact_single.iter().enumerate() {
            if recs.is_empty() {
                return Err(Error::InvalidRestrictions(format!(
                    "shock {} ({}) has no impact restriction",
                    j + 1,
                    self.shock_names[j]
                )));
            }
        }
        Ok(())
    }

    /// Check the shock-pair identifiability conditions and report witnesses.
    pub fn check_assumptions(&self) -> AssumptionReport {
        let mut pairs = Vec::new();
        for j in 0..self.m {
            for l in (j + 1)..self.m {
                pairs.push(PairReport {
                    shock_j: j,
                    shock_l: l,
                    witness: self.find_witness(j, l),
                });
            }
        }
        let holds = !pairs.is_empty() || self.m == 1;
        let holds = holds && pairs.iter().all(|p| p.witness.is_some());
        AssumptionReport { holds, pairs }
    }

    fn find_witness(&self, j: usize, l: usize) -> Option<Witness> {
        // Condition 1: a variable with equal nonzero pure signs for both
        // shocks, and a distinct variable with opposite signs.
        let signs = |shock: usize| -> Vec<(usize, f64)> {
            self.impact_single[shock]
                .iter()
                .filter(|r| r.kind == RestrictionKind::Sign)
                .map(|r| (r.var_i, r.sign))
                .collect()
        };
        let sj = signs(j);
        let sl = signs(l);
        let mut same: Vec<usize> = Vec::new();
        let mut opposite: Vec<usize> = Vec::new();
        for &(i, a) in &sj {
            for &(i2, b) in &sl {
                if i == i2 {
                    if a == b && !same.contains(&i) {
                        same.push(i);
                    }
                    if a == -b && !opposite.contains(&i) {
                        opposite.push(i);
                    }
                }
            }
        }
        for &i1 in &same {
            for &i2 in &opposite {
                if i1 != i2 {
                    return Some(Witness { i1, i2, condition: 1 });
                }
            }
        }
        // Condition 2: matched single-shock ranking restrictions with equal
        // positive lambda and opposite signs.
        for r1 in self.impact_single[j].iter().filter(|r| r.kind == RestrictionKind::Ranking) {
            for r2 in self.impact_single[l].iter().filter(|r| r.kind == RestrictionKind::Ranking) {
                if r1.var_i == r2.var_i
                    && r1.var_k == r2.var_k
                    && r1.lambda == r2.lambda
                    && r1.lambda > 0.0
                    && r1.sign == -r2.sign
                {
                    return Some(Witness { i1: r1.var_i, i2: r1.var_k.unwrap(), condition: 2 });
                }
            }
        }
        None
    }

    /// Evaluate shock `j`'s impact restrictions on a column of length n.
    pub fn column_satisfies(&self, shock: usize, column: &DVector<f64>) -> ColumnFit {
        let mut plus = true;
        let mut minus = true;
        for r in &self.impact_single[shock] {
            let v = r.eval_column(column);
            if v < 0.0 {
                plus = false;
            }
            if v > 0.0 {
                minus = false;
            }
            if !plus && !minus {
                return ColumnFit::Neither;
            }
        }
        match (plus, minus) {
            (true, true) => ColumnFit::Both,
            (true, false) => ColumnFit::Plus,
            (false, true) => ColumnFit::Minus,
            (false, false) => ColumnFit::Neither,
        }
    }

    /// Build the candidate table for R = L*Q. With `strict` requested, `Both`
    /// cells collapse to `Plus` (a measure-zero event under continuous
    /// posteriors).
    pub fn build_candidate_table(&self, r: &DMatrix<f64>, strict: bool) -> CandidateTable {
        assert_eq!(r.nrows(), self.n);
        assert_eq!(r.ncols(), self.n);
        let mut entries = vec![Candidacy::No; self.m * self.n];
        for i in 0..self.n {
            let column = r.column(i).into_owned();
            for j in 0..self.m {
                let cell = match self.column_satisfies(j, &column) {
                    ColumnFit::Plus => Candidacy::Plus,
                    ColumnFit::Minus => Candidacy::Minus,
                    ColumnFit::Both => {
                        if strict {
                            Candidacy::Plus
                        } else {
                            Candidacy::Both
                        }
                    }
                    ColumnFit::Neither => Candidacy::No,
                };
                entries[j * self.n + i] = cell;
            }
        }
        CandidateTable::from_entries(self.m, self.n, entries)
    }

    /// True iff every cross-shock ranking restriction holds on the assigned
    /// impact matrix.
    pub fn check_cross_shock(&self, impact: &DMatrix<f64>) -> bool {
        self.cross_shock.iter().all(|r| {
            let lhs = impact[(r.var_i, r.shock_j)];
            let rhs = impact[(r.var_k.unwrap(), r.shock_l.unwrap())];
            r.sign * (lhs - r.lambda * rhs) >= 0.0
        })
    }

    /// True iff every dynamic restriction holds on the impulse responses.
    pub fn check_dynamic(&self, irf: &IrfTensor) -> Result<bool> {
        for r in &self.dynamic {
            if r.horizon > irf.h_max {
                return Err(Error::HorizonExceeded { h: r.horizon, max: irf.h_max });
            }
            let lhs = irf.response(r.var_i, r.shock_j, r.horizon);
            let v = match r.kind {
                RestrictionKind::Sign => r.sign * lhs,
                RestrictionKind::Ranking => {
                    let rhs = irf.response(r.var_k.unwrap(), r.shock_l.unwrap(), r.horizon);
                    r.sign * (lhs - r.lambda * rhs)
                }
            };
            if v < 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Serialize back to the restriction file format. `parse_restrictions`
    /// of the output reproduces the set exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("#variables: {}\n", self.variable_names.join(",")));
        out.push_str(&format!("#shocks: {}\n", self.shock_names.join(",")));
        out.push_str("kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n");
        let mut write = |r: &Restriction| {
            let (kind, k, l, lambda) = match r.kind {
                RestrictionKind::Sign => ("sign", String::new(), String::new(), String::new()),
                RestrictionKind::Ranking => (
                    "ranking",
                    (r.var_k.unwrap() + 1).to_string(),
                    (r.shock_l.unwrap() + 1).to_string(),
                    format!("{}", r.lambda),
                ),
            };
            out.push_str(&format!(
                "{kind},{},{},{k},{l},{},{lambda},{}\n",
                r.var_i + 1,
                r.shock_j + 1,
                if r.sign > 0.0 { "+1" } else { "-1" },
                r.horizon
            ));
        };
        for recs in &self.impact_single {
            for r in recs {
                write(r);
            }
        }
        for r in &self.cross_shock {
            write(r);
        }
        for r in &self.dynamic {
            write(r);
        }
        out
    }
}

fn parse_index(field: &str, names: &[String], what: &str, line: usize) -> Result<usize> {
    let field = field.trim();
    if let Ok(ix) = field.parse::<usize>() {
        if ix == 0 || ix > names.len() {
            return Err(Error::Parse {
                line,
                msg: format!("{what} index {ix} out of range 1..={}", names.len()),
            });
        }
        return Ok(ix - 1);
    }
    names
        .iter()
        .position(|nm| nm == field)
        .ok_or_else(|| Error::Parse { line, msg: format!("unknown {what} label {field:?}") })
}

/// Parse a restriction file into a validated, partitioned set.
pub fn parse_restrictions(text: &str) -> Result<RestrictionSet> {
    let mut variable_names: Option<Vec<String>> = None;
    let mut shock_names: Option<Vec<String>> = None;
    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("variables:") {
                variable_names = Some(v.split(',').map(|s| s.trim().to_string()).collect());
            } else if let Some(s) = rest.strip_prefix("shocks:") {
                shock_names = Some(s.split(',').map(|s| s.trim().to_string()).collect());
            }
            // other comment lines are ignored
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if !saw_header && fields.first().map(String::as_str) == Some("kind") {
            saw_header = true;
            continue;
        }
        if fields.len() != 8 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        records.push((line_no, fields));
    }

    if records.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no restrictions".into() });
    }

    // Without a preamble, infer the dimensions from the largest indices.
    let infer = |col_ixs: &[usize], prefix: &str| -> Result<Vec<String>> {
        let mut max = 0usize;
        for &(line, ref fields) in records.iter().map(|r| (r.0, &r.1)).collect::<Vec<_>>().iter() {
            for &c in col_ixs {
                let f = fields[c].trim();
                if f.is_empty() {
                    continue;
                }
                let ix: usize = f.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("{prefix} field {f:?} must be a 1-based index when no preamble names are declared"),
                })?;
                if ix == 0 {
                    return Err(Error::Parse { line, msg: format!("{prefix} index must be 1-based") });
                }
                max = max.max(ix);
            }
        }
        Ok((1..=max).map(|i| format!("{prefix}{i}")).collect())
    };
    let variable_names = match variable_names {
        Some(v) => v,
        None => infer(&[1, 3], "V")?,
    };
    let shock_names = match shock_names {
        Some(v) => v,
        None => infer(&[2, 4], "S")?,
    };
    let n = variable_names.len();
    let m = shock_names.len();
    if n == 0 || m == 0 {
        return Err(Error::Parse { line: 1, msg: "empty variable or shock list".into() });
    }

    let mut set = RestrictionSet {
        n,
        m,
        variable_names,
        shock_names,
        impact_single: vec![Vec::new(); m],
        cross_shock: Vec::new(),
        dynamic: Vec::new(),
    };

    for (line, fields) in records {
        let kind = match fields[0].as_str() {
            "sign" => RestrictionKind::Sign,
            "ranking" => RestrictionKind::Ranking,
            other => {
                return Err(Error::Parse { line, msg: format!("unknown kind {other:?}") });
            }
        };
        let var_i = parse_index(&fields[1], &set.variable_names, "variable", line)?;
        let shock_j = parse_index(&fields[2], &set.shock_names, "shock", line)?;
        let sign = match fields[5].as_str() {
            "+1" | "1" => 1.0,
            "-1" => -1.0,
            other => {
                return Err(Error::Parse { line, msg: format!("sign must be -1 or +1, got {other:?}") });
            }
        };
        let horizon = if fields[7].is_empty() {
            0
        } else {
            fields[7].parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad horizon {:?}: {e}", fields[7]),
            })?
        };
        let lambda = if fields[6].is_empty() {
            0.0
        } else {
            let v: f64 = fields[6].parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad lambda {:?}: {e}", fields[6]),
            })?;
            if v < 0.0 {
                return Err(Error::Parse { line, msg: "lambda must be >= 0".into() });
            }
            v
        };

        let rec = match kind {
            RestrictionKind::Sign => {
                if !fields[3].is_empty() || !fields[4].is_empty() {
                    return Err(Error::Parse {
                        line,
                        msg: "sign records must leave var_k and shock_l empty".into(),
                    });
                }
                Restriction { kind, var_i, shock_j, var_k: None, shock_l: None, sign, lambda: 0.0, horizon }
            }
            RestrictionKind::Ranking => {
                if fields[3].is_empty() || fields[4].is_empty() {
                    return Err(Error::Parse {
                        line,
                        msg: "ranking records need var_k and shock_l".into(),
                    });
                }
                let var_k = parse_index(&fields[3], &set.variable_names, "variable", line)?;
                let shock_l = parse_index(&fields[4], &set.shock_names, "shock", line)?;
                if lambda == 0.0 {
                    // Ranking with lambda = 0 is a sign restriction on (i, j).
                    Restriction {
                        kind: RestrictionKind::Sign,
                        var_i,
                        shock_j,
                        var_k: None,
                        shock_l: None,
                        sign,
                        lambda: 0.0,
                        horizon,
                    }
                } else {
                    Restriction {
                        kind,
                        var_i,
                        shock_j,
                        var_k: Some(var_k),
                        shock_l: Some(shock_l),
                        sign,
                        lambda,
                        horizon,
                    }
                }
            }
        };

        if rec.horizon > 0 {
            set.dynamic.push(rec);
        } else if rec.is_single_shock() {
            let j = rec.shock_j;
            set.impact_single[j].push(rec);
        } else {
            set.cross_shock.push(rec);
        }
    }

    Ok(set)
}
