//! UAV-to-station association: association probabilities, the Gamma
//! cell-area approximation, per-cell UAV counts and serving distances.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::Result;
use crate::params::{Association, GeometryParams, ParamSet, PolicyDecision, StationKind};
use crate::pointprocess::FirstContact;
use crate::quad::{self, FailureSlot, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationSplit {
    pub a_ev: f64,
    pub a_d: f64,
    pub policy: PolicyDecision,
}

impl AssociationSplit {
    pub fn get(&self, kind: StationKind) -> f64 {
        match kind {
            StationKind::Ev => self.a_ev,
            StationKind::Uav => self.a_d,
        }
    }
}

/// Truncation level for the semi-infinite distance integrals.
const TAIL_EPS: f64 = 1e-13;

/// Both station processes seen from a typical UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationGeometry {
    pub ev: FirstContact,
    pub d: FirstContact,
}

impl StationGeometry {
    pub fn new(g: &GeometryParams) -> Self {
        Self { ev: FirstContact::new(g.lambda_l, g.lambda_p_ev), d: FirstContact::new(g.lambda_l, g.lambda_p_d) }
    }

    pub fn first_contact(&self, kind: StationKind) -> &FirstContact {
        match kind {
            StationKind::Ev => &self.ev,
            StationKind::Uav => &self.d,
        }
    }

    /// `(A_ev|r, A_d|r)`. At `r = 0` these are limits (both 1).
    pub fn conditional(&self, r: f64, beta_d: f64) -> Result<(f64, f64)> {
        Ok((self.d.ccdf(r / beta_d)?, self.ev.ccdf(beta_d * r)?))
    }

    /// Density of the serving distance jointly with associating to `kind`:
    /// `F̄_other(·) f_kind(y)`.
    pub fn joint_kernel(&self, kind: StationKind, beta_d: f64, y: f64) -> Result<f64> {
        match kind {
            StationKind::Ev => Ok(self.d.ccdf(y / beta_d)? * self.ev.pdf(y)?),
            StationKind::Uav => Ok(self.ev.ccdf(y * beta_d)? * self.d.pdf(y)?),
        }
    }

    /// Radius beyond which the first-contact CCDF of `kind` is negligible.
    pub fn tail_radius(&self, kind: StationKind) -> Result<f64> {
        self.first_contact(kind).tail_radius(TAIL_EPS)
    }

    fn kernel_mass(&self, kind: StationKind, beta_d: f64) -> Result<f64> {
        let top = self.tail_radius(kind)?;
        let slot = FailureSlot::new();
        let f = |r: f64| {
            self.joint_kernel(kind, beta_d, r).unwrap_or_else(|e| {
                slot.record(e);
                0.0
            })
        };
        let e = quad::integrate(f, 0.0, top, Tolerance::new(1e-12, 1e-10))?;
        slot.finish(e.value)
    }

    /// Biased-distance association probabilities.
    pub fn assoc_prob(&self, beta_d: f64) -> Result<AssociationSplit> {
        Ok(AssociationSplit {
            a_ev: self.kernel_mass(StationKind::Ev, beta_d)?,
            a_d: self.kernel_mass(StationKind::Uav, beta_d)?,
            policy: PolicyDecision::biased(beta_d),
        })
    }

    /// Serving-distance pdf conditioned on associating with `kind`.
    pub fn conditional_distance_pdf(&self, y: f64, beta_d: f64, kind: StationKind, split: &AssociationSplit) -> Result<f64> {
        Ok(self.joint_kernel(kind, beta_d, y)? / split.get(kind))
    }
}

/// Association split for either policy.
pub fn association_split(p: &ParamSet, decision: &PolicyDecision) -> Result<AssociationSplit> {
    let geo = p.geometry.with_extra_uav_stations(decision.delta_lambda_c_d);
    match decision.association {
        Association::BiasedDistance(b) => {
            let mut s = StationGeometry::new(&geo).assoc_prob(b)?;
            s.policy = *decision;
            Ok(s)
        }
        Association::IndependentThinning(b) => Ok(AssociationSplit { a_ev: b, a_d: 1.0 - b, policy: *decision }),
    }
}

/// `(β_o λ_u, (1 - β_o) λ_u)`.
pub fn thinning_split(beta_o: f64, lambda_u: f64) -> (f64, f64) {
    let ev = beta_o * lambda_u;
    (ev, lambda_u - ev)
}

/// Gamma approximation of the association cell area with effective station
/// density `lambda_eff = λ / A`.
pub fn cell_area_pdf(area: f64, lambda_eff: f64, a: f64, b: f64) -> f64 {
    if area <= 0.0 {
        return 0.0;
    }
    let x = lambda_eff * area;
    (a * b.ln() - ln_gamma(a) + (a - 1.0) * x.ln() - b * x).exp() * lambda_eff
}

/// Area of the cell containing a uniformly chosen point: `c f_C(c)`
/// normalized. For `a = b` this equals the Gamma form with exponent `a`.
pub fn biased_cell_pdf(area: f64, lambda_eff: f64, a: f64, b: f64) -> f64 {
    if area <= 0.0 {
        return 0.0;
    }
    let x = lambda_eff * area;
    ((a + 1.0) * b.ln() - ln_gamma(a + 1.0) + a * x.ln() - b * x).exp() * lambda_eff
}

/// PMF of a UAV count over `0..=n_max` plus the unrepresented tail mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLoadPmf {
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

const PMF_CAP: usize = 2000;
const PMF_TAIL: f64 = 1e-13;

impl CellLoadPmf {
    /// Poisson mixture over a Gamma(`shape`, rate `b/ρ`) intensity: a
    /// negative binomial with `p(n+1)/p(n) = (shape + n)/(n + 1) · ρ/(b + ρ)`.
    fn gamma_poisson(shape: f64, b: f64, rho: f64) -> Self {
        if rho <= 0.0 {
            return Self { probs: vec![1.0], tail_mass: 0.0 };
        }
        let q = rho / (b + rho);
        let mut p = (shape * (b / (b + rho)).ln()).exp();
        let mut probs = Vec::new();
        let mut acc = 0.0;
        let mut n = 0usize;
        loop {
            probs.push(p);
            acc += p;
            if 1.0 - acc < PMF_TAIL && n as f64 > shape * q / (1.0 - q) || n + 1 >= PMF_CAP {
                break;
            }
            p *= (shape + n as f64) / (n as f64 + 1.0) * q;
            n += 1;
        }
        Self { probs, tail_mass: (1.0 - acc).max(0.0) }
    }

    /// Other UAVs in the cell of the typical UAV (size-biased cell), with
    /// mean load ratio `rho = λ_u A / λ_c`.
    pub fn other_uavs(rho: f64, a: f64, b: f64) -> Self {
        Self::gamma_poisson(a + 1.0, b, rho)
    }

    /// UAVs associated with a typical station (unbiased cell).
    pub fn typical_station(rho: f64, a: f64, b: f64) -> Self {
        Self::gamma_poisson(a, b, rho)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail_mass
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }
}

/// Closed-form per-cell count PMF: `Γ(a+n+1)/Γ(a) b^a/n! λ'^{a+1} λ_u^n /
/// (bλ' + λ_u)^{a+n+1}`, `λ' = λ_c / A`. Evaluated in log space.
pub fn uav_count_pmf_term(n: usize, lambda_c: f64, a_split: f64, lambda_u: f64, a: f64, b: f64) -> f64 {
    let le = lambda_c / a_split;
    let nf = n as f64;
    (ln_gamma(a + nf + 1.0) - ln_gamma(a) + a * b.ln() - ln_gamma(nf + 1.0) + (a + 1.0) * le.ln()
        + nf * lambda_u.ln()
        - (a + nf + 1.0) * (b * le + lambda_u).ln())
    .exp()
}

/// Per-cell count PMF of other UAVs at a station with density `lambda_c`
/// and association share `a_split`.
pub fn uav_count_pmf(lambda_c: f64, a_split: f64, lambda_u: f64, a: f64, b: f64) -> CellLoadPmf {
    CellLoadPmf::other_uavs(lambda_u * a_split / lambda_c, a, b)
}

/// Mean load ratio `λ_u^{kind} A_kind / λ_c,kind` under a decision, with
/// the UAV density entering per policy (unthinned for biased distance).
pub fn load_ratio(p: &ParamSet, decision: &PolicyDecision, split: &AssociationSplit, kind: StationKind) -> f64 {
    let geo = p.geometry.with_extra_uav_stations(decision.delta_lambda_c_d);
    let lu = p.geometry.lambda_u;
    match decision.association {
        Association::BiasedDistance(_) => lu * split.get(kind) / geo.lambda_c(kind),
        Association::IndependentThinning(b) => {
            let (ev, d) = thinning_split(b, lu);
            match kind {
                StationKind::Ev => ev / geo.lambda_c_ev,
                StationKind::Uav => d / geo.lambda_c_d,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo() -> StationGeometry {
        StationGeometry::new(&ParamSet::default().geometry)
    }

    #[test]
    fn conditional_limits() {
        let g = geo();
        assert_eq!(g.conditional(0.0, 1.0).unwrap(), (1.0, 1.0));
        let (ev, _) = g.conditional(500.0, 1e9).unwrap();
        assert!(ev > 1.0 - 1e-6);
        let same = StationGeometry { ev: g.ev, d: g.ev };
        let (a, b) = same.conditional(700.0, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn partition_and_symmetry() {
        let g = geo();
        for beta in [0.5, 1.0, 2.0] {
            let s = g.assoc_prob(beta).unwrap();
            assert!((s.a_ev + s.a_d - 1.0).abs() < 1e-6, "{beta}: {s:?}");
        }
        let same = StationGeometry { ev: g.ev, d: g.ev };
        let s = same.assoc_prob(1.0).unwrap();
        assert!((s.a_ev - 0.5).abs() < 1e-9);
    }

    #[test]
    fn a_ev_monotone_in_beta() {
        let g = geo();
        let mut prev = 0.0;
        for beta in [0.1, 0.3, 1.0, 3.0, 10.0] {
            let a = g.assoc_prob(beta).unwrap().a_ev;
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn conditional_distance_normalized() {
        let g = geo();
        let s = g.assoc_prob(1.3).unwrap();
        for kind in [StationKind::Ev, StationKind::Uav] {
            let top = g.tail_radius(kind).unwrap();
            let i = quad::integrate(
                |y| g.conditional_distance_pdf(y, 1.3, kind, &s).unwrap(),
                0.0,
                top,
                Tolerance::new(1e-10, 1e-10),
            )
            .unwrap();
            assert!((i.value - 1.0).abs() < 1e-5);
        }
        let same = StationGeometry { ev: g.ev, d: g.ev };
        let s = same.assoc_prob(1.0).unwrap();
        for y in [100.0, 800.0, 2500.0] {
            let a = same.conditional_distance_pdf(y, 1.0, StationKind::Ev, &s).unwrap();
            let b = same.conditional_distance_pdf(y, 1.0, StationKind::Uav, &s).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn cell_area_pdfs() {
        let (a, b) = (3.5, 3.5);
        let le = 0.5e-6 / 0.7;
        let tol = Tolerance::new(1e-14, 1e-12);
        let top = 60.0 / le;
        let n1 = quad::integrate(|c| cell_area_pdf(c, le, a, b), 0.0, top, tol).unwrap();
        let n2 = quad::integrate(|c| biased_cell_pdf(c, le, a, b), 0.0, top, tol).unwrap();
        assert!((n1.value - 1.0).abs() < 1e-8 && (n2.value - 1.0).abs() < 1e-8);
        let m = quad::integrate(|c| c * cell_area_pdf(c, le, a, b), 0.0, top, tol).unwrap();
        assert!((m.value * le - a / b).abs() < 1e-8);
        let ratio = |c: f64| biased_cell_pdf(c, le, a, b) / (c * cell_area_pdf(c, le, a, b));
        assert!((ratio(1e5) / ratio(4e6) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pmf_matches_closed_form_and_mean() {
        let g = ParamSet::default().geometry;
        let (a, b) = (3.5, 3.5);
        let split = 0.6;
        let pmf = uav_count_pmf(g.lambda_c_ev, split, g.lambda_u, a, b);
        assert!((pmf.total() - 1.0).abs() < 1e-9);
        assert!(pmf.tail_mass <= 1e-6);
        for n in [0, 3, 10, 40] {
            let closed = uav_count_pmf_term(n, g.lambda_c_ev, split, g.lambda_u, a, b);
            assert!((pmf.probs[n] / closed - 1.0).abs() < 1e-10, "{n}");
        }
        let rho = g.lambda_u * split / g.lambda_c_ev;
        assert!((pmf.mean() / ((a + 1.0) / b * rho) - 1.0).abs() < 1e-8);
        let eight = CellLoadPmf::other_uavs(8.0, a, b);
        assert!((eight.mean() - 8.0 * 4.5 / 3.5).abs() < 1e-8);
        let typical = CellLoadPmf::typical_station(8.0, a, b);
        assert!((typical.mean() - 8.0).abs() < 1e-8);
    }

    #[test]
    fn thinning_fixtures() {
        assert_eq!(thinning_split(0.0, 4e-6), (0.0, 4e-6));
        assert_eq!(thinning_split(1.0, 4e-6), (4e-6, 0.0));
        let (x, y) = thinning_split(0.3, 4e-6);
        assert_eq!(x + y, 4e-6);
        let p = ParamSet::default();
        let d = PolicyDecision::thinning(0.0);
        let s = association_split(&p, &d).unwrap();
        assert_eq!(load_ratio(&p, &d, &s, StationKind::Ev), 0.0);
        assert!((load_ratio(&p, &d, &s, StationKind::Uav) - 4e-6 / p.geometry.lambda_c_d).abs() < 1e-12);
    }
}
