//! Accept-reject samplers for restriction-consistent impact matrices.
//!
//! All samplers accept or reject the pair of a posterior draw and a Haar draw
//! jointly: a rejected pair discards both, never reusing the posterior draw
//! with a fresh orthogonal matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::restrictions::{Candidacy, CandidateTable, ColumnFit, RestrictionSet};
use crate::rng::draw_stream;
use crate::sampling::orthogonal::{cholesky_lower, sample_haar};
use crate::sampling::posterior::PosteriorDraws;
use crate::var::{compute_irf, VarParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Column-permutation and sign-switch search over the candidate table.
    Proposed,
    /// Classical one-shot baseline: test the fixed column-to-shock mapping.
    Rwz,
    /// Enumeration of admissible assignments; valid without the
    /// identifiability assumptions.
    Fallback,
    /// Restrictions on the rows of A0 = B0^{-1}.
    A0,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::Proposed => "proposed",
            Algorithm::Rwz => "rwz",
            Algorithm::Fallback => "fallback",
            Algorithm::A0 => "a0",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Algorithm::Proposed),
            "rwz" => Ok(Algorithm::Rwz),
            "fallback" => Ok(Algorithm::Fallback),
            "a0" => Ok(Algorithm::A0),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Which source column (and sign) represents a shock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShockAssignment {
    pub column: usize,
    pub negated: bool,
}

/// Per-call tallies. `posterior_draws` always equals `haar_draws`: pairs are
/// accepted or rejected jointly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawCounters {
    pub candidates: u64,
    pub rejected_impact: u64,
    pub rejected_cross: u64,
    pub rejected_dynamic: u64,
    pub posterior_draws: u64,
    pub haar_draws: u64,
}

/// An accepted draw: reduced-form parameters plus a restriction-consistent
/// impact matrix. Columns m+1..n of `impact` are an arbitrary orthogonal
/// completion and carry no identification content.
#[derive(Debug, Clone)]
pub struct AdmissibleDraw {
    pub params: VarParams,
    pub impact: DMatrix<f64>,
    pub assignment: Vec<ShockAssignment>,
    /// Populated in A0 mode only.
    pub a0: Option<DMatrix<f64>>,
    pub counters: DrawCounters,
}

/// Aggregate accounting over a batch of requested draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DrawStats {
    pub candidates: u64,
    pub admissible: u64,
    pub rejected_impact: u64,
    pub rejected_cross: u64,
    pub rejected_dynamic: u64,
    pub elapsed_seconds: f64,
}

impl DrawStats {
    pub fn absorb(&mut self, counters: &DrawCounters, accepted: bool) {
        self.candidates += counters.candidates;
        self.rejected_impact += counters.rejected_impact;
        self.rejected_cross += counters.rejected_cross;
        self.rejected_dynamic += counters.rejected_dynamic;
        if accepted {
            self.admissible += 1;
        }
    }

    pub fn acceptance_probability(&self) -> f64 {
        if self.candidates == 0 {
            0.0
        } else {
            self.admissible as f64 / self.candidates as f64
        }
    }

    /// candidates = admissible + rejections, by stage.
    pub fn is_conserved(&self) -> bool {
        self.candidates
            == self.admissible + self.rejected_impact + self.rejected_cross + self.rejected_dynamic
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DrawConfig {
    /// Candidate-pair cap per requested admissible draw.
    pub cap: u64,
    /// Upper bound on the enumerated assignment list in fallback mode.
    pub enum_limit: usize,
}

impl Default for DrawConfig {
    fn default() -> Self {
        Self { cap: 10_000_000, enum_limit: 1 << 20 }
    }
}

/// Draw uniformly from the admissible set by searching the candidate table
/// for column permutations and sign switches. Requires the identifiability
/// assumptions (strict mode).
pub fn algorithm1_draw<P: PosteriorDraws, R: Rng + ?Sized>(
    posterior: &P,
    set: &RestrictionSet,
    rng: &mut R,
    config: &DrawConfig,
) -> Result<AdmissibleDraw> {
    set.validate_strict()?;
    if !set.check_assumptions().holds {
        return Err(Error::AssumptionViolated(
            "use the fallback sampler for schemes without pairwise witnesses".into(),
        ));
    }
    draw_loop(posterior, set, rng, config, |set, r_mat, rng| {
        let table = set.build_candidate_table(r_mat, true);
        if table.has_empty_row() {
            return None;
        }
        if !multiplicity_thinning(&table, rng) {
            return None;
        }
        assign_strict(&table, rng)
    })
}

/// Keep the candidate pair with probability proportional to the number of
/// admissible relabelings its table supports. A uniform pick per row alone
/// would give every nonempty table the same weight, over-representing
/// rotations with few admissible relabelings relative to the plain
/// accept-reject baseline, which weights every admissible relabeling equally.
/// Thinning by (number of assignments) / (scheme-wide maximum) restores the
/// baseline's distribution exactly while preserving the conditional
/// uniformity of the subsequent pick.
fn multiplicity_thinning<R: Rng + ?Sized>(table: &CandidateTable, rng: &mut R) -> bool {
    let mut k: u64 = 1;
    for j in 0..table.m {
        k *= (0..table.n).filter(|&i| table.entry(j, i) != Candidacy::No).count() as u64;
    }
    let bound = max_assignment_count(table.n, table.m);
    k >= bound || rng.gen_range(0..bound) < k
}

/// Largest possible number of admissible assignments for a strict table:
/// rows claim disjoint column sets, so the product of row candidate counts
/// is maximized by the most balanced composition of n into m parts.
fn max_assignment_count(n: usize, m: usize) -> u64 {
    let q = (n / m) as u64;
    let r = n % m;
    (0..m).map(|j| if j < r { q + 1 } else { q }).product()
}

/// Classical baseline: accept only when columns 1..m of R = L*Q satisfy
/// shocks 1..m directly, without permutation or sign switch.
pub fn rwz_draw<P: PosteriorDraws, R: Rng + ?Sized>(
    posterior: &P,
    set: &RestrictionSet,
    rng: &mut R,
    config: &DrawConfig,
) -> Result<AdmissibleDraw> {
    draw_loop(posterior, set, rng, config, |set, r_mat, _rng| {
        for j in 0..set.m {
            let fit = set.column_satisfies(j, &r_mat.column(j).into_owned());
            if !matches!(fit, ColumnFit::Plus | ColumnFit::Both) {
                return None;
            }
        }
        Some((0..set.m).map(|j| ShockAssignment { column: j, negated: false }).collect())
    })
}

/// Enumeration fallback: valid for any scheme. Enumerates all injective
/// shock-to-column assignments consistent with the candidate table and picks
/// one uniformly.
pub fn fallback_enumeration_draw<P: PosteriorDraws, R: Rng + ?Sized>(
    posterior: &P,
    set: &RestrictionSet,
    rng: &mut R,
    config: &DrawConfig,
) -> Result<AdmissibleDraw> {
    let limit = config.enum_limit;
    let mut failure: Option<Error> = None;
    let out = draw_loop(posterior, set, rng, config, |set, r_mat, rng| {
        let table = set.build_candidate_table(r_mat, false);
        match enumerate_assignments(&table, limit) {
            Ok(list) if list.is_empty() => None,
            Ok(list) => Some(list[rng.gen_range(0..list.len())].clone()),
            Err(e) => {
                failure = Some(e);
                None
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => out,
    }
}

/// All injective shock-to-column assignments with sign choices consistent
/// with the table. A `Both` cell contributes both sign choices.
pub fn enumerate_assignments(
    table: &CandidateTable,
    limit: usize,
) -> Result<Vec<Vec<ShockAssignment>>> {
    let mut out = Vec::new();
    let mut used = vec![false; table.n];
    let mut partial = Vec::with_capacity(table.m);
    backtrack(table, 0, &mut used, &mut partial, &mut out, limit)?;
    Ok(out)
}

fn backtrack(
    table: &CandidateTable,
    shock: usize,
    used: &mut [bool],
    partial: &mut Vec<ShockAssignment>,
    out: &mut Vec<Vec<ShockAssignment>>,
    limit: usize,
) -> Result<()> {
    if shock == table.m {
        if out.len() >= limit {
            return Err(Error::EnumerationLimit(limit));
        }
        out.push(partial.clone());
        return Ok(());
    }
    for i in 0..table.n {
        if used[i] {
            continue;
        }
        let options: &[bool] = match table.entry(shock, i) {
            Candidacy::No => &[],
            Candidacy::Plus => &[false],
            Candidacy::Minus => &[true],
            Candidacy::Both => &[false, true],
        };
        for &negated in options {
            used[i] = true;
            partial.push(ShockAssignment { column: i, negated });
            backtrack(table, shock + 1, used, partial, out, limit)?;
            partial.pop();
            used[i] = false;
        }
    }
    Ok(())
}

/// Restrictions interpreted on the rows of A0 = B0^{-1}: search row
/// permutations and sign switches of R-bar = Q * U, where U'U = Sigma^{-1}.
pub fn a0_mode_draw<P: PosteriorDraws, R: Rng + ?Sized>(
    posterior: &P,
    set: &RestrictionSet,
    rng: &mut R,
    config: &DrawConfig,
) -> Result<AdmissibleDraw> {
    if !set.dynamic.is_empty() {
        return Err(Error::Config("A0 mode supports impact restrictions only".into()));
    }
    set.validate_strict()?;
    if !set.check_assumptions().holds {
        return Err(Error::AssumptionViolated(
            "A0 mode requires pairwise witnesses over the A0 restriction table".into(),
        ));
    }
    let n = set.n;
    let m = set.m;
    let mut counters = DrawCounters::default();
    for _ in 0..config.cap {
        let params = posterior.draw_params(rng);
        counters.posterior_draws += 1;
        let sigma_inv = params
            .sigma
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        let sigma_inv = (&sigma_inv + sigma_inv.transpose()) * 0.5;
        // Sigma^{-1} = G G' with G lower, so U = G' satisfies U'U = Sigma^{-1}.
        let upper = cholesky_lower(&sigma_inv)?.transpose();
        let q = sample_haar(n, rng);
        counters.haar_draws += 1;
        counters.candidates += 1;
        let r_bar = q * &upper;

        // candidate table over rows
        let mut entries = vec![Candidacy::No; m * n];
        for r in 0..n {
            let row = DVector::from_fn(n, |i, _| r_bar[(r, i)]);
            for j in 0..m {
                entries[j * n + r] = match set.column_satisfies(j, &row) {
                    ColumnFit::Plus | ColumnFit::Both => Candidacy::Plus,
                    ColumnFit::Minus => Candidacy::Minus,
                    ColumnFit::Neither => Candidacy::No,
                };
            }
        }
        let table = CandidateTable::from_entries(m, n, entries);
        if table.has_empty_row() || !multiplicity_thinning(&table, rng) {
            counters.rejected_impact += 1;
            continue;
        }
        let assignment = match assign_strict(&table, rng) {
            Some(a) => a,
            None => {
                counters.rejected_impact += 1;
                continue;
            }
        };

        let mut a0 = DMatrix::zeros(n, n);
        let mut used = vec![false; n];
        for (j, a) in assignment.iter().enumerate() {
            used[a.column] = true;
            let sign = if a.negated { -1.0 } else { 1.0 };
            for i in 0..n {
                a0[(j, i)] = sign * r_bar[(a.column, i)];
            }
        }
        fill_remaining_rows(&mut a0, &r_bar, &mut used, m, rng);

        // cross-shock records read A0 elements: restriction (i, j) is A0[j, i]
        if !set.cross_shock.is_empty() && !set.check_cross_shock(&a0.transpose()) {
            counters.rejected_cross += 1;
            continue;
        }
        let impact = match a0.clone().try_inverse() {
            Some(b0) => b0,
            None => {
                counters.rejected_impact += 1;
                continue;
            }
        };
        return Ok(AdmissibleDraw { params, impact, assignment, a0: Some(a0), counters });
    }
    Err(Error::CapExhausted { cap: config.cap, admissible: 0 })
}

/// Shared candidate loop for the column-search samplers: the closure maps a
/// candidate R to an assignment, or `None` to reject the pair.
fn draw_loop<P, R, F>(
    posterior: &P,
    set: &RestrictionSet,
    rng: &mut R,
    config: &DrawConfig,
    mut assign: F,
) -> Result<AdmissibleDraw>
where
    P: PosteriorDraws,
    R: Rng + ?Sized,
    F: FnMut(&RestrictionSet, &DMatrix<f64>, &mut R) -> Option<Vec<ShockAssignment>>,
{
    let n = set.n;
    let m = set.m;
    if posterior.n() != n {
        return Err(Error::Dimension(format!(
            "posterior has n={}, restriction set has n={n}",
            posterior.n()
        )));
    }
    let h_dyn = set.max_dynamic_horizon();
    let mut counters = DrawCounters::default();
    for _ in 0..config.cap {
        let params = posterior.draw_params(rng);
        counters.posterior_draws += 1;
        let lower = cholesky_lower(&params.sigma)?;
        let q = sample_haar(n, rng);
        counters.haar_draws += 1;
        counters.candidates += 1;
        let r_mat = &lower * q;

        let assignment = match assign(set, &r_mat, rng) {
            Some(a) => a,
            None => {
                counters.rejected_impact += 1;
                continue;
            }
        };

        let mut impact = DMatrix::zeros(n, n);
        let mut used = vec![false; n];
        for (j, a) in assignment.iter().enumerate() {
            used[a.column] = true;
            let sign = if a.negated { -1.0 } else { 1.0 };
            for i in 0..n {
                impact[(i, j)] = sign * r_mat[(i, a.column)];
            }
        }
        fill_remaining_columns(&mut impact, &r_mat, &mut used, m, rng);

        if !set.cross_shock.is_empty() && !set.check_cross_shock(&impact) {
            counters.rejected_cross += 1;
            continue;
        }
        if !set.dynamic.is_empty() {
            let irf = compute_irf(&params, &impact, m, h_dyn)?;
            if !set.check_dynamic(&irf)? {
                counters.rejected_dynamic += 1;
                continue;
            }
        }
        return Ok(AdmissibleDraw { params, impact, assignment, a0: None, counters });
    }
    Err(Error::CapExhausted { cap: config.cap, admissible: 0 })
}

/// Step-4a assignment under a strict table: for each shock, draw a candidate
/// column uniformly from its row. Returns `None` on a column collision,
/// which can only arise from `Both` cells on a measure-zero boundary.
fn assign_strict<R: Rng + ?Sized>(
    table: &CandidateTable,
    rng: &mut R,
) -> Option<Vec<ShockAssignment>> {
    let mut assignment = Vec::with_capacity(table.m);
    let mut used = vec![false; table.n];
    for j in 0..table.m {
        let candidates: Vec<usize> =
            (0..table.n).filter(|&i| table.entry(j, i) != Candidacy::No).collect();
        let pick = candidates[rng.gen_range(0..candidates.len())];
        if used[pick] {
            return None;
        }
        used[pick] = true;
        let negated = match table.entry(j, pick) {
            Candidacy::Minus => true,
            _ => false,
        };
        assignment.push(ShockAssignment { column: pick, negated });
    }
    Some(assignment)
}

/// Step 4b: attach the unused columns in random order with fair random signs.
fn fill_remaining_columns<R: Rng + ?Sized>(
    impact: &mut DMatrix<f64>,
    r_mat: &DMatrix<f64>,
    used: &mut [bool],
    m: usize,
    rng: &mut R,
) {
    let n = r_mat.nrows();
    for j in m..n {
        let free: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
        let pick = free[rng.gen_range(0..free.len())];
        used[pick] = true;
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for i in 0..n {
            impact[(i, j)] = sign * r_mat[(i, pick)];
        }
    }
}

fn fill_remaining_rows<R: Rng + ?Sized>(
    a0: &mut DMatrix<f64>,
    r_bar: &DMatrix<f64>,
    used: &mut [bool],
    m: usize,
    rng: &mut R,
) {
    let n = r_bar.nrows();
    for j in m..n {
        let free: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
        let pick = free[rng.gen_range(0..free.len())];
        used[pick] = true;
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for i in 0..n {
            a0[(j, i)] = sign * r_bar[(pick, i)];
        }
    }
}

/// Dispatch a single admissible draw through the chosen algorithm.
pub fn draw_once<P: PosteriorDraws, R: Rng + ?Sized>(
    algorithm: Algorithm,
    posterior: &P,
    set: &RestrictionSet,
    rng: &mut R,
    config: &DrawConfig,
) -> Result<AdmissibleDraw> {
    match algorithm {
        Algorithm::Proposed => algorithm1_draw(posterior, set, rng, config),
        Algorithm::Rwz => rwz_draw(posterior, set, rng, config),
        Algorithm::Fallback => fallback_enumeration_draw(posterior, set, rng, config),
        Algorithm::A0 => a0_mode_draw(posterior, set, rng, config),
    }
}

/// A batch of admissible draws with aggregate accounting.
#[derive(Debug)]
pub struct Collection {
    pub draws: Vec<AdmissibleDraw>,
    pub stats: DrawStats,
    /// True when some requested draw hit its candidate cap; `draws` is then
    /// partial.
    pub exhausted: bool,
}

/// Collect `count` admissible draws.
///
/// Draw `k` is always produced from the dedicated counter-based stream
/// `draw_stream(seed, k)` and draws are returned in index order, so both the
/// multiset and the order of accepted draws are independent of the worker
/// count; `workers` only controls scheduling.
pub fn collect_draws<P: PosteriorDraws + Sync>(
    algorithm: Algorithm,
    posterior: &P,
    set: &RestrictionSet,
    count: usize,
    seed: u64,
    workers: usize,
    config: &DrawConfig,
) -> Result<Collection> {
    let started = std::time::Instant::now();
    let mut draws: Vec<Option<AdmissibleDraw>> = Vec::new();
    let mut stats = DrawStats::default();
    let mut exhausted = false;

    let workers = workers.max(1);
    let results = collect_split(algorithm, posterior, set, count, seed, workers, config)?;
    for slot in results {
        match slot {
            Ok(d) => {
                stats.absorb(&d.counters, true);
                draws.push(Some(d));
            }
            Err(Error::CapExhausted { .. }) => {
                stats.candidates += config.cap;
                stats.rejected_impact += config.cap;
                exhausted = true;
            }
            Err(e) => return Err(e),
        }
    }

    stats.elapsed_seconds = started.elapsed().as_secs_f64();
    Ok(Collection { draws: draws.into_iter().flatten().collect(), stats, exhausted })
}

fn collect_split<P: PosteriorDraws + Sync>(
    algorithm: Algorithm,
    posterior: &P,
    set: &RestrictionSet,
    count: usize,
    seed: u64,
    workers: usize,
    config: &DrawConfig,
) -> Result<Vec<Result<AdmissibleDraw>>> {
    let mut partial: Vec<Vec<(usize, Result<AdmissibleDraw>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w..count)
                        .step_by(workers)
                        .map(|k| {
                            let mut rng = draw_stream(seed, k as u64);
                            (k, draw_once(algorithm, posterior, set, &mut rng, config))
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    });
    let mut slots: Vec<Option<Result<AdmissibleDraw>>> = (0..count).map(|_| None).collect();
    for chunk in partial.drain(..) {
        for (k, r) in chunk {
            slots[k] = Some(r);
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restrictions::parse_restrictions;
    use crate::rng::master_stream;
    use crate::sampling::posterior::Posterior;

    fn point_posterior(sigma: DMatrix<f64>) -> Posterior {
        let n = sigma.nrows();
        Posterior::Point(
            VarParams::new(DVector::zeros(n), vec![DMatrix::zeros(n, n)], sigma).unwrap(),
        )
    }

    fn single_sign_set(n: usize) -> RestrictionSet {
        let mut text = String::from("kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n");
        text.push_str("sign,1,1,,,+1,,0\n");
        let mut set = parse_restrictions(&text).unwrap();
        set.resize(n, 1).unwrap();
        set
    }

    #[test]
    fn single_sign_restriction_always_accepts_first_pair() {
        let set = single_sign_set(2);
        let posterior = point_posterior(DMatrix::identity(2, 2));
        let mut rng = master_stream(41);
        for _ in 0..200 {
            let d = algorithm1_draw(&posterior, &set, &mut rng, &DrawConfig::default()).unwrap();
            assert_eq!(d.counters.candidates, 1);
            assert!(d.impact[(0, 0)] >= 0.0);
        }
    }

    #[test]
    fn pairs_are_rejected_jointly() {
        // posterior draws consumed must equal Haar draws consumed
        let set = crate::restrictions::tests::s0_3();
        let posterior = point_posterior(DMatrix::identity(4, 4));
        let mut rng = master_stream(42);
        for _ in 0..50 {
            let d = algorithm1_draw(&posterior, &set, &mut rng, &DrawConfig::default()).unwrap();
            assert_eq!(d.counters.posterior_draws, d.counters.haar_draws);
            assert_eq!(d.counters.candidates, d.counters.haar_draws);
        }
    }

    #[test]
    fn strict_assignment_on_worked_table() {
        // table T2: shock 1 can use columns {1,3,4}, shock 2 must use column
        // 2 negated
        let set = crate::restrictions::tests::s0_3();
        let table = set.build_candidate_table(&crate::restrictions::tests::r_matrix_2(), true);
        let mut rng = master_stream(43);
        let mut seen = [false; 4];
        for _ in 0..200 {
            let a = assign_strict(&table, &mut rng).unwrap();
            assert!([0, 2, 3].contains(&a[0].column));
            seen[a[0].column] = true;
            assert_eq!(a[1].column, 1);
            assert!(a[1].negated);
            assert_eq!(a[0].negated, a[0].column == 2);
        }
        assert!(seen[0] && seen[2] && seen[3]);
    }

    #[test]
    fn enumeration_matches_hand_count_on_degenerate_table() {
        let set = crate::restrictions::tests::s0_4();
        let table = set.build_candidate_table(&crate::restrictions::tests::r_matrix_3(), false);
        let list = enumerate_assignments(&table, 1 << 10).unwrap();
        assert_eq!(list.len(), 2);
        let cols: Vec<(usize, usize)> = list.iter().map(|a| (a[0].column, a[1].column)).collect();
        assert!(cols.contains(&(0, 3)));
        assert!(cols.contains(&(3, 0)));
        assert!(list.iter().all(|a| !a[0].negated && !a[1].negated));
    }

    #[test]
    fn enumeration_limit_is_enforced() {
        let set = crate::restrictions::tests::s0_4();
        let table = set.build_candidate_table(&crate::restrictions::tests::r_matrix_3(), false);
        assert!(matches!(
            enumerate_assignments(&table, 1),
            Err(Error::EnumerationLimit(1))
        ));
    }

    #[test]
    fn fallback_rejects_all_none_rows() {
        // With Sigma = I the rows of Q are orthogonal, so both sign patterns
        // always appear among the columns and nothing is ever rejected. A
        // strong positive correlation between the two restricted variables
        // makes opposite-signed columns rare, so the shock-2 row is often
        // empty.
        let set = crate::restrictions::tests::s0_3();
        let mut sigma = DMatrix::identity(4, 4);
        sigma[(0, 1)] = 0.95;
        sigma[(1, 0)] = 0.95;
        let posterior = point_posterior(sigma);
        let mut rng = master_stream(44);
        let mut rejected = 0;
        for _ in 0..50 {
            let d =
                fallback_enumeration_draw(&posterior, &set, &mut rng, &DrawConfig::default())
                    .unwrap();
            rejected += d.counters.rejected_impact;
        }
        assert!(rejected > 0);
    }

    #[test]
    fn algorithm1_requires_assumptions() {
        let set = crate::restrictions::tests::s0_4();
        let posterior = point_posterior(DMatrix::identity(4, 4));
        let mut rng = master_stream(45);
        assert!(matches!(
            algorithm1_draw(&posterior, &set, &mut rng, &DrawConfig::default()),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn cap_exhaustion_reports_error() {
        // an infeasible scheme: both signs required on the same entry
        let text = "kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n\
                    sign,1,1,,,+1,,0\nsign,2,1,,,+1,,0\n\
                    ranking,1,1,2,1,+1,1,0\nranking,2,1,1,1,+1,2,0\n\
                    ranking,1,1,2,1,-1,3,0\n";
        let set = parse_restrictions(text).unwrap();
        let posterior = point_posterior(DMatrix::identity(2, 2));
        let mut rng = master_stream(46);
        let config = DrawConfig { cap: 100, enum_limit: 1 << 10 };
        let r = fallback_enumeration_draw(&posterior, &set, &mut rng, &config);
        assert!(matches!(r, Err(Error::CapExhausted { cap: 100, .. })));
    }

    #[test]
    fn rwz_scalar_acceptance_is_one_half() {
        let set = single_sign_set(2);
        let posterior = point_posterior(DMatrix::identity(2, 2));
        let mut rng = master_stream(47);
        let mut stats = DrawStats::default();
        for _ in 0..400 {
            let d = rwz_draw(&posterior, &set, &mut rng, &DrawConfig::default()).unwrap();
            stats.absorb(&d.counters, true);
        }
        let p = stats.acceptance_probability();
        assert!((p - 0.5).abs() < 0.06, "acceptance {p}");
        assert!(stats.is_conserved());
    }

    #[test]
    fn a0_mode_identity_case() {
        let text = "kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\nsign,1,1,,,+1,,0\n";
        let mut set = parse_restrictions(text).unwrap();
        set.resize(3, 1).unwrap();
        let posterior = point_posterior(DMatrix::identity(3, 3));
        let mut rng = master_stream(48);
        let d = a0_mode_draw(&posterior, &set, &mut rng, &DrawConfig::default()).unwrap();
        let a0 = d.a0.as_ref().unwrap();
        assert!(a0[(0, 0)] >= 0.0);
        let resid = (a0.transpose() * a0 - DMatrix::identity(3, 3)).abs().max();
        assert!(resid < 1e-8);
    }

    #[test]
    fn a0_mode_reconstructs_precision_and_sigma() {
        let mut rng = master_stream(49);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let sigma = &a * a.transpose() + DMatrix::identity(4, 4);
        let sigma_inv = sigma.clone().cholesky().unwrap().inverse();
        let text = "kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\nsign,1,1,,,+1,,0\n";
        let mut set = parse_restrictions(text).unwrap();
        set.resize(4, 1).unwrap();
        let posterior = point_posterior(sigma.clone());
        let d = a0_mode_draw(&posterior, &set, &mut rng, &DrawConfig::default()).unwrap();
        let a0 = d.a0.as_ref().unwrap();
        assert!((a0.transpose() * a0 - &sigma_inv).abs().max() < 1e-8);
        assert!((&d.impact * d.impact.transpose() - &sigma).abs().max() < 1e-6);
    }

    #[test]
    fn split_collection_is_worker_count_invariant() {
        let set = crate::restrictions::tests::s0_3();
        let posterior = point_posterior(DMatrix::identity(4, 4));
        let config = DrawConfig::default();
        let one =
            collect_draws(Algorithm::Proposed, &posterior, &set, 24, 99, 1, &config).unwrap();
        let four =
            collect_draws(Algorithm::Proposed, &posterior, &set, 24, 99, 4, &config).unwrap();
        assert_eq!(one.draws.len(), 24);
        for (a, b) in one.draws.iter().zip(four.draws.iter()) {
            assert_eq!(a.impact, b.impact);
        }
    }

    #[test]
    fn sequential_collection_is_deterministic() {
        let set = crate::restrictions::tests::s0_3();
        let posterior = point_posterior(DMatrix::identity(4, 4));
        let config = DrawConfig::default();
        let a = collect_draws(Algorithm::Proposed, &posterior, &set, 10, 5, 1, &config).unwrap();
        let b = collect_draws(Algorithm::Proposed, &posterior, &set, 10, 5, 1, &config).unwrap();
        for (x, y) in a.draws.iter().zip(b.draws.iter()) {
            assert_eq!(x.impact, y.impact);
        }
        assert!(a.stats.is_conserved());
    }
}
