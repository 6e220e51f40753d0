//! Convex energy densities, their conjugates, subdifferentials and proximal
//! maps, and the coupled two-species graph built on top of them.
//!
//! An energy density beta(x, .) is convex, lower semi-continuous, vanishes at
//! the origin and is extended by zero on the negative axis. Its conjugate is
//! taken over nonnegative arguments only,
//!
//!   beta*(x, q) = sup_{r >= 0} ( q r - beta(x, r) ),
//!
//! which makes beta* vanish for q <= 0 and keeps it nondecreasing. The
//! two-species coupling acts through the sum of the densities: the pair
//! energy is B(r1, r2) = beta(r1 + r2) on the nonnegative quadrant and +inf
//! outside, and its subdifferential relates density pairs to potential pairs
//! through the max of the potentials. All operations here are pointwise and
//! pure; spatial variation enters only through per-node parameter fields.

use crate::error::Error;

/// Built-in energy families.
#[derive(Debug, Clone, PartialEq)]
pub enum LawFamily {
    /// beta(r) = r^(m+1) / (m+1), m >= 1.
    PorousMedium { exponent: f64 },
    /// Hard capacity constraint: beta = 0 on [0, cap], +inf above.
    CrowdMotion { capacity: f64 },
    /// beta(r) = c ((r - M)+)^2; pure quadratic c r^2 when M = 0.
    QuadraticShifted { weight: f64, threshold: f64 },
    /// Convex piecewise-linear interpolation of samples.
    Tabulated(TabulatedLaw),
}

/// Piecewise-linear convex law given by breakpoints (r_j, beta_j).
///
/// The first breakpoint must be (0, 0). Beyond the last breakpoint the law
/// either continues with the final slope (`extend = true`) or jumps to +inf.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLaw {
    pub r: Vec<f64>,
    pub beta: Vec<f64>,
    pub extend: bool,
}

impl TabulatedLaw {
    pub fn new(r: Vec<f64>, beta: Vec<f64>, extend: bool) -> Result<Self, Error> {
        if r.len() != beta.len() || r.len() < 2 {
            return Err(Error::Law("tabulated law needs >= 2 matching samples".into()));
        }
        if r[0] != 0.0 || beta[0] != 0.0 {
            return Err(Error::Law("tabulated law must start at (0, 0)".into()));
        }
        let mut prev_slope = f64::NEG_INFINITY;
        for j in 0..r.len() - 1 {
            let dr = r[j + 1] - r[j];
            if dr <= 0.0 {
                return Err(Error::Law("tabulated abscissae must be strictly increasing".into()));
            }
            let slope = (beta[j + 1] - beta[j]) / dr;
            if slope < prev_slope - 1e-12 {
                return Err(Error::Law("tabulated samples are not convex".into()));
            }
            prev_slope = prev_slope.max(slope);
        }
        if beta.iter().any(|&b| b < 0.0) {
            return Err(Error::Law("tabulated values must be nonnegative".into()));
        }
        Ok(TabulatedLaw { r, beta, extend })
    }

    fn slopes(&self) -> Vec<f64> {
        (0..self.r.len() - 1)
            .map(|j| (self.beta[j + 1] - self.beta[j]) / (self.r[j + 1] - self.r[j]))
            .collect()
    }
}

/// Per-node overrides of the scalar family parameters.
#[derive(Debug, Clone, Default)]
pub struct SpatialParams {
    pub exponent: Option<Vec<f64>>,
    pub capacity: Option<Vec<f64>>,
    pub weight: Option<Vec<f64>>,
    pub threshold: Option<Vec<f64>>,
}

impl SpatialParams {
    pub fn is_empty(&self) -> bool {
        self.exponent.is_none()
            && self.capacity.is_none()
            && self.weight.is_none()
            && self.threshold.is_none()
    }
}

/// Growth constants of the quadratic lower bound C ((|r| - M)+)^2 <= beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coercivity {
    pub big_c: f64,
    pub big_m: f64,
}

/// A spatially parameterizable convex energy density.
#[derive(Debug, Clone)]
pub struct EnergyLaw {
    family: LawFamily,
    spatial: SpatialParams,
    coercivity: Coercivity,
}

impl EnergyLaw {
    pub fn new(family: LawFamily) -> Result<Self, Error> {
        Self::with_spatial(family, SpatialParams::default())
    }

    pub fn with_spatial(family: LawFamily, spatial: SpatialParams) -> Result<Self, Error> {
        let coercivity = default_coercivity(&family);
        let law = EnergyLaw { family, spatial, coercivity };
        law.validate_scalar_params()?;
        Ok(law)
    }

    pub fn porous_medium(m: f64) -> Self {
        Self::new(LawFamily::PorousMedium { exponent: m }).expect("valid exponent")
    }

    pub fn crowd_motion(cap: f64) -> Self {
        Self::new(LawFamily::CrowdMotion { capacity: cap }).expect("valid capacity")
    }

    /// The plain quadratic beta(r) = r^2 / 2.
    pub fn quadratic() -> Self {
        Self::new(LawFamily::QuadraticShifted { weight: 0.5, threshold: 0.0 }).unwrap()
    }

    pub fn family(&self) -> &LawFamily {
        &self.family
    }

    pub fn coercivity(&self) -> Coercivity {
        self.coercivity
    }

    pub fn set_coercivity(&mut self, c: Coercivity) {
        self.coercivity = c;
    }

    fn validate_scalar_params(&self) -> Result<(), Error> {
        let check = |v: f64, lo: f64, what: &str| -> Result<(), Error> {
            if !(v >= lo) || !v.is_finite() {
                return Err(Error::Law(format!("{what} must be >= {lo}, got {v}")));
            }
            Ok(())
        };
        match &self.family {
            LawFamily::PorousMedium { exponent } => check(*exponent, 1.0, "exponent")?,
            LawFamily::CrowdMotion { capacity } => {
                if !(*capacity > 0.0) {
                    return Err(Error::Law(format!("capacity must be > 0, got {capacity}")));
                }
            }
            LawFamily::QuadraticShifted { weight, threshold } => {
                if !(*weight > 0.0) {
                    return Err(Error::Law(format!("weight must be > 0, got {weight}")));
                }
                check(*threshold, 0.0, "threshold")?;
            }
            LawFamily::Tabulated(_) => {}
        }
        if let Some(es) = &self.spatial.exponent {
            for &e in es {
                check(e, 1.0, "spatial exponent")?;
            }
        }
        if let Some(cs) = &self.spatial.capacity {
            for &c in cs {
                if !(c > 0.0) {
                    return Err(Error::Law("spatial capacity must be > 0".into()));
                }
            }
        }
        if let Some(ws) = &self.spatial.weight {
            for &w in ws {
                if !(w > 0.0) {
                    return Err(Error::Law("spatial weight must be > 0".into()));
                }
            }
        }
        if let Some(ts) = &self.spatial.threshold {
            for &t in ts {
                check(t, 0.0, "spatial threshold")?;
            }
        }
        Ok(())
    }

    /// Resolve the law at sample point `x` (a node index into the spatial
    /// parameter fields; ignored when no spatial variation is present).
    pub fn at(&self, x: usize) -> PointLaw<'_> {
        let pick = |field: &Option<Vec<f64>>, default: f64| -> f64 {
            match field {
                Some(v) => v[x.min(v.len() - 1)],
                None => default,
            }
        };
        match &self.family {
            LawFamily::PorousMedium { exponent } => {
                PointLaw::PorousMedium { m: pick(&self.spatial.exponent, *exponent) }
            }
            LawFamily::CrowdMotion { capacity } => {
                PointLaw::CrowdMotion { cap: pick(&self.spatial.capacity, *capacity) }
            }
            LawFamily::QuadraticShifted { weight, threshold } => PointLaw::QuadraticShifted {
                c: pick(&self.spatial.weight, *weight),
                m0: pick(&self.spatial.threshold, *threshold),
            },
            LawFamily::Tabulated(t) => PointLaw::Tabulated(t),
        }
    }
}

fn default_coercivity(family: &LawFamily) -> Coercivity {
    match family {
        LawFamily::PorousMedium { exponent } => {
            if *exponent == 1.0 {
                Coercivity { big_c: 0.5, big_m: 0.0 }
            } else {
                Coercivity { big_c: 1.0 / (exponent + 1.0), big_m: 1.0 }
            }
        }
        LawFamily::CrowdMotion { capacity } => Coercivity { big_c: 1.0, big_m: *capacity },
        LawFamily::QuadraticShifted { weight, threshold } => {
            Coercivity { big_c: *weight, big_m: *threshold }
        }
        LawFamily::Tabulated(t) => {
            // best quadratic minorant fitted on the breakpoints
            let big_m = t
                .r
                .iter()
                .zip(&t.beta)
                .filter(|(_, &b)| b <= 1e-14)
                .map(|(&r, _)| r)
                .fold(0.0, f64::max);
            let mut big_c = f64::INFINITY;
            for (&r, &b) in t.r.iter().zip(&t.beta) {
                if r > big_m + 1e-12 {
                    big_c = big_c.min(b / (r - big_m).powi(2));
                }
            }
            if !big_c.is_finite() {
                big_c = 1.0;
            }
            Coercivity { big_c, big_m }
        }
    }
}

/// Closed interval, possibly unbounded on either side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

/// A density/potential pair, candidate member of the coupled graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPoint {
    pub r: [f64; 2],
    pub d: [f64; 2],
}

/// Shape of the inverse coupled graph at a potential pair.
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySelection {
    /// d1 < d2: all mass goes to the second species.
    SecondOnly(Interval),
    /// d1 > d2: all mass goes to the first species.
    FirstOnly(Interval),
    /// d1 = d2: any nonnegative split of a total in the interval.
    Simplex(Interval),
}

/// Evaluation report of the four equivalent membership characterizations.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    pub member: bool,
    pub fenchel_residual: f64,
    pub argmax_deficit: f64,
    pub complementarity: [f64; 2],
    pub checks: [bool; 4],
    pub agree: bool,
}

/// The law resolved at one sample point: concrete scalar parameters.
#[derive(Debug, Clone, Copy)]
pub enum PointLaw<'a> {
    PorousMedium { m: f64 },
    CrowdMotion { cap: f64 },
    QuadraticShifted { c: f64, m0: f64 },
    Tabulated(&'a TabulatedLaw),
}

impl<'a> PointLaw<'a> {
    /// beta(r); extended by zero on r <= 0, +inf past a hard capacity.
    pub fn beta(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self {
            PointLaw::PorousMedium { m } => r.powf(m + 1.0) / (m + 1.0),
            PointLaw::CrowdMotion { cap } => {
                if r <= *cap {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PointLaw::QuadraticShifted { c, m0 } => {
                let e = (r - m0).max(0.0);
                c * e * e
            }
            PointLaw::Tabulated(t) => {
                let last = t.r.len() - 1;
                if r >= t.r[last] {
                    if t.extend {
                        let s = t.slopes()[last - 1];
                        t.beta[last] + s * (r - t.r[last])
                    } else if r <= t.r[last] {
                        t.beta[last]
                    } else {
                        f64::INFINITY
                    }
                } else {
                    let j = t.r.partition_point(|&rj| rj <= r) - 1;
                    let s = (t.beta[j + 1] - t.beta[j]) / (t.r[j + 1] - t.r[j]);
                    t.beta[j] + s * (r - t.r[j])
                }
            }
        }
    }

    /// beta*(q) = sup_{r >= 0} (q r - beta(r)); zero for q <= 0.
    pub fn conjugate(&self, q: f64) -> Result<f64, Error> {
        if q <= 0.0 {
            return Ok(0.0);
        }
        match self {
            PointLaw::PorousMedium { m } => Ok(m / (m + 1.0) * q.powf((m + 1.0) / m)),
            PointLaw::CrowdMotion { cap } => Ok(cap * q),
            PointLaw::QuadraticShifted { c, m0 } => Ok(q * m0 + q * q / (4.0 * c)),
            PointLaw::Tabulated(t) => {
                if t.extend {
                    let slopes = t.slopes();
                    let s_last = *slopes.last().unwrap();
                    if q > s_last {
                        return Err(Error::Domain(format!(
                            "conjugate of linearly extended tabulated law is unbounded at q = {q} \
                             (largest slope {s_last})"
                        )));
                    }
                }
                let mut best: f64 = 0.0;
                for (&rj, &bj) in t.r.iter().zip(&t.beta) {
                    best = best.max(q * rj - bj);
                }
                Ok(best)
            }
        }
    }

    /// Subdifferential of beta at r >= 0 within the effective domain.
    pub fn subdiff(&self, r: f64) -> Result<Interval, Error> {
        if r < 0.0 {
            return Err(Error::Domain(format!("subdifferential requested at r = {r} < 0")));
        }
        if self.beta(r) == f64::INFINITY {
            return Err(Error::Domain(format!(
                "subdifferential requested outside the effective domain (r = {r})"
            )));
        }
        match self {
            PointLaw::PorousMedium { m } => {
                if r == 0.0 {
                    Ok(Interval { lo: f64::NEG_INFINITY, hi: 0.0 })
                } else {
                    Ok(Interval::point(r.powf(*m)))
                }
            }
            PointLaw::CrowdMotion { cap } => {
                if r == 0.0 {
                    Ok(Interval { lo: f64::NEG_INFINITY, hi: 0.0 })
                } else if r < *cap {
                    Ok(Interval::point(0.0))
                } else {
                    Ok(Interval { lo: 0.0, hi: f64::INFINITY })
                }
            }
            PointLaw::QuadraticShifted { c, m0 } => {
                if r == 0.0 {
                    Ok(Interval { lo: f64::NEG_INFINITY, hi: 0.0 })
                } else {
                    Ok(Interval::point(2.0 * c * (r - m0).max(0.0)))
                }
            }
            PointLaw::Tabulated(t) => {
                let slopes = t.slopes();
                let last = t.r.len() - 1;
                if r == 0.0 {
                    return Ok(Interval { lo: f64::NEG_INFINITY, hi: slopes[0] });
                }
                if r >= t.r[last] {
                    if t.extend {
                        if r > t.r[last] {
                            return Ok(Interval::point(slopes[last - 1]));
                        }
                        return Ok(Interval { lo: slopes[last - 1], hi: slopes[last - 1] });
                    }
                    return Ok(Interval { lo: slopes[last - 1], hi: f64::INFINITY });
                }
                let j = t.r.partition_point(|&rj| rj <= r) - 1;
                if r == t.r[j] && j > 0 {
                    Ok(Interval { lo: slopes[j - 1], hi: slopes[j] })
                } else {
                    Ok(Interval::point(slopes[j]))
                }
            }
        }
    }

    /// Subdifferential of the conjugate at q.
    pub fn conj_subdiff(&self, q: f64) -> Interval {
        if q < 0.0 {
            return Interval::point(0.0);
        }
        match self {
            PointLaw::PorousMedium { m } => Interval::point(q.powf(1.0 / m)),
            PointLaw::CrowdMotion { cap } => {
                if q == 0.0 {
                    Interval { lo: 0.0, hi: *cap }
                } else {
                    Interval::point(*cap)
                }
            }
            PointLaw::QuadraticShifted { c, m0 } => {
                if q == 0.0 {
                    Interval { lo: 0.0, hi: *m0 }
                } else {
                    Interval::point(m0 + q / (2.0 * c))
                }
            }
            PointLaw::Tabulated(t) => {
                let slopes = t.slopes();
                if q < slopes[0] {
                    return Interval::point(0.0);
                }
                for (j, &s) in slopes.iter().enumerate() {
                    if q == s {
                        let hi = if j + 1 < t.r.len() { t.r[j + 1] } else { f64::INFINITY };
                        return Interval { lo: t.r[j], hi };
                    }
                    if q < s {
                        return Interval::point(t.r[j]);
                    }
                }
                let last = t.r.len() - 1;
                if t.extend {
                    Interval { lo: t.r[last], hi: f64::INFINITY }
                } else {
                    Interval::point(t.r[last])
                }
            }
        }
    }

    /// Unique minimizer of (a - q)^2 / (2 s) + beta*(a), s > 0.
    pub fn prox_conjugate(&self, s: f64, q: f64) -> f64 {
        debug_assert!(s > 0.0);
        if q <= 0.0 {
            return q;
        }
        match self {
            PointLaw::PorousMedium { m } => {
                if *m == 1.0 {
                    return q / (1.0 + s);
                }
                // solve a + s a^(1/m) = q on (0, q)
                let mut lo = 0.0;
                let mut hi = q;
                let mut a = q / (1.0 + s);
                for _ in 0..200 {
                    let f = a + s * a.powf(1.0 / m) - q;
                    if f > 0.0 {
                        hi = a;
                    } else {
                        lo = a;
                    }
                    let df = 1.0 + s / m * a.powf(1.0 / m - 1.0);
                    let mut next = a - f / df;
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - a).abs() <= 1e-16 * (1.0 + a.abs()) {
                        a = next;
                        break;
                    }
                    a = next;
                }
                a
            }
            PointLaw::CrowdMotion { cap } => {
                if q > s * cap {
                    q - s * cap
                } else {
                    0.0
                }
            }
            PointLaw::QuadraticShifted { c, m0 } => {
                if q <= s * m0 {
                    0.0
                } else {
                    (q - s * m0) * 2.0 * c / (2.0 * c + s)
                }
            }
            PointLaw::Tabulated(t) => {
                // scan the piecewise-constant graph of d(beta*) for
                // q - a in s * conj_subdiff(a)
                let slopes = t.slopes();
                // flat part: a < slopes[0] with derivative 0
                if q < slopes[0] {
                    return q;
                }
                for (j, &sj) in slopes.iter().enumerate() {
                    // kink of beta* at a = sj, subdifferential [r_j, r_{j+1}]
                    let r_lo = t.r[j];
                    let r_hi = if j + 1 < t.r.len() { t.r[j + 1] } else { f64::INFINITY };
                    if q >= sj + s * r_lo && q <= sj + s * r_hi {
                        return sj;
                    }
                    // open segment (s_j, s_{j+1}) with derivative r_{j+1}
                    if j + 1 < slopes.len() {
                        let a = q - s * t.r[j + 1];
                        if a > sj && a < slopes[j + 1] {
                            return a;
                        }
                    }
                }
                // beyond the last kink: derivative r_last (bounded domain)
                let last = t.r.len() - 1;
                if !t.extend {
                    return q - s * t.r[last];
                }
                // extended law: conjugate is +inf past the final slope, so
                // the prox saturates there
                *slopes.last().unwrap()
            }
        }
    }

    /// Minimizer of |a - q|^2 / (2 s) + beta*(a1 v a2) over pairs.
    ///
    /// Candidate enumeration: each species alone carries the max, or the two
    /// components tie; the feasible candidate with the lowest objective wins,
    /// with ties (within 1e-14) resolved in favor of the tied candidate.
    pub fn prox_coupled(&self, s: f64, q: [f64; 2]) -> [f64; 2] {
        let obj = |a: [f64; 2]| -> f64 {
            let quad = ((a[0] - q[0]).powi(2) + (a[1] - q[1]).powi(2)) / (2.0 * s);
            quad + self.conjugate(a[0].max(a[1])).unwrap_or(f64::INFINITY)
        };
        let mut best: Option<([f64; 2], f64)> = None;
        let a1 = self.prox_conjugate(s, q[0]);
        if q[1] <= a1 {
            let cand = [a1, q[1]];
            best = Some((cand, obj(cand)));
        }
        let a2 = self.prox_conjugate(s, q[1]);
        if q[0] <= a2 {
            let cand = [q[0], a2];
            let v = obj(cand);
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((cand, v));
            }
        }
        let t = self.prox_conjugate(s / 2.0, 0.5 * (q[0] + q[1]));
        let tied = [t, t];
        let tied_v = obj(tied);
        match best {
            Some((cand, v)) if v < tied_v - 1e-14 => cand,
            _ => tied,
        }
    }

    /// Minimizer over a2 of (a2 - q2)^2 / (2 s) + beta*(c v a2) with the
    /// first component pinned at c.
    pub fn prox_coupled_pinned(&self, s: f64, c: f64, q2: f64) -> f64 {
        let below = q2.min(c);
        let obj_below = (below - q2).powi(2) / (2.0 * s)
            + self.conjugate(c).unwrap_or(f64::INFINITY);
        let above = self.prox_conjugate(s, q2).max(c);
        let obj_above = (above - q2).powi(2) / (2.0 * s)
            + self.conjugate(above).unwrap_or(f64::INFINITY);
        if obj_below <= obj_above {
            below
        } else {
            above
        }
    }

    /// Pair energy B(r) = beta(r1 + r2) on the nonnegative quadrant.
    pub fn pair_energy(&self, r: [f64; 2]) -> f64 {
        if r[0] < 0.0 || r[1] < 0.0 {
            return f64::INFINITY;
        }
        self.beta(r[0] + r[1])
    }

    /// Upper end of the effective domain of beta.
    pub fn domain_cap(&self) -> f64 {
        match self {
            PointLaw::CrowdMotion { cap } => *cap,
            PointLaw::Tabulated(t) if !t.extend => *t.r.last().unwrap(),
            _ => f64::INFINITY,
        }
    }

    /// Euclidean projection of a density pair onto the feasible set
    /// {r >= 0, r1 + r2 <= domain cap}.
    pub fn project_pair(&self, r: [f64; 2]) -> [f64; 2] {
        let cap = self.domain_cap();
        let mut p = [r[0].max(0.0), r[1].max(0.0)];
        if p[0] + p[1] > cap {
            let t = (p[0] + p[1] - cap) / 2.0;
            p = [p[0] - t, p[1] - t];
            if p[0] < 0.0 {
                p = [0.0, p[1] + p[0]];
                p[1] = p[1].clamp(0.0, cap);
            } else if p[1] < 0.0 {
                p = [p[0] + p[1], 0.0];
                p[0] = p[0].clamp(0.0, cap);
            }
        }
        p
    }

    /// Pair conjugate B*(d) = beta*(d1 v d2).
    pub fn pair_conjugate(&self, d: [f64; 2]) -> Result<f64, Error> {
        self.conjugate(d[0].max(d[1]))
    }

    /// Inverse-graph descriptor at a potential pair.
    pub fn select_density(&self, d: [f64; 2]) -> DensitySelection {
        if d[0] < d[1] {
            DensitySelection::SecondOnly(self.conj_subdiff(d[1]))
        } else if d[0] > d[1] {
            DensitySelection::FirstOnly(self.conj_subdiff(d[0]))
        } else {
            DensitySelection::Simplex(self.conj_subdiff(d[0]))
        }
    }

    /// Test membership of (r, d) in the coupled graph via all four
    /// equivalent characterizations and report their agreement.
    pub fn coupled_membership(&self, point: GraphPoint, tol: f64) -> MembershipReport {
        let GraphPoint { r, d } = point;
        let dmax = d[0].max(d[1]);
        let total = r[0] + r[1];
        let nonneg = r[0] >= -tol && r[1] >= -tol;

        // (1) Fenchel equality
        let pairing = r[0] * d[0] + r[1] * d[1];
        let fenchel_residual = {
            let b = self.beta(total.max(0.0));
            let bs = self.conjugate(dmax).unwrap_or(f64::INFINITY);
            if b.is_infinite() || bs.is_infinite() {
                f64::INFINITY
            } else {
                b + bs - pairing
            }
        };
        let check_fenchel = nonneg && fenchel_residual <= tol;

        // (2) argmax over the nonnegative quadrant by grid search, with two
        // local refinements so the grid slack stays below the tolerance
        let reach = {
            let sel = self.conj_subdiff(dmax);
            let hi = if sel.hi.is_finite() { sel.hi } else { sel.lo };
            (total.abs().max(hi) + 2.0).min(1e6)
        };
        let objective = |s1: f64, s2: f64| s1 * d[0] + s2 * d[1] - self.beta(s1 + s2);
        let mut window = (0.0f64, 0.0f64, reach);
        let mut grid_max = 0.0f64; // value at the origin
        let mut h = reach;
        for pass in 0..3 {
            let n = if pass == 0 { 200 } else { 40 };
            let (lo1, lo2, width) = window;
            h = width / n as f64;
            let mut best = (grid_max, lo1.max(0.0), lo2.max(0.0));
            for i in 0..=n {
                let s1 = lo1 + i as f64 * h;
                if s1 < 0.0 {
                    continue;
                }
                for j in 0..=n {
                    let s2 = lo2 + j as f64 * h;
                    if s2 < 0.0 {
                        continue;
                    }
                    let v = objective(s1, s2);
                    if v > best.0 {
                        best = (v, s1, s2);
                    }
                }
            }
            grid_max = grid_max.max(best.0);
            window = (best.1 - 2.0 * h, best.2 - 2.0 * h, 4.0 * h);
        }
        let own_value = if nonneg && self.beta(total.max(0.0)).is_finite() {
            pairing - self.beta(total.max(0.0))
        } else {
            f64::NEG_INFINITY
        };
        let grid_slack = 2.0 * h * (d[0].abs().max(d[1].abs()) + 1.0);
        let argmax_deficit = grid_max - own_value;
        let check_argmax = nonneg && argmax_deficit <= tol + grid_slack;

        // (3) complementarity form
        let comp = [r[0] * (d[1] - d[0]).max(0.0), r[1] * (d[0] - d[1]).max(0.0)];
        let in_subdiff = self
            .subdiff(total.max(0.0))
            .map(|iv| iv.contains(dmax, tol))
            .unwrap_or(false);
        let check_comp = nonneg && in_subdiff && comp[0] <= tol && comp[1] <= tol;

        // (4) max-potential form
        let mut check_maxpot = nonneg && in_subdiff;
        for k in 0..2 {
            if r[k] > tol && dmax - d[k] > tol {
                check_maxpot = false;
            }
        }

        let checks = [check_fenchel, check_argmax, check_comp, check_maxpot];
        let agree = checks.iter().all(|&c| c == checks[0]);
        MembershipReport {
            member: check_fenchel,
            fenchel_residual,
            argmax_deficit,
            complementarity: comp,
            checks,
            agree,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D grid-search minimizer of (a - q)^2/(2s) + beta*(a); the window is
    /// refined once around the coarse argmin, which convexity permits.
    fn prox_conjugate_oracle(law: &PointLaw, s: f64, q: f64) -> f64 {
        let mut lo = -6.0f64.max(q.abs() + 1.0) * 1.0 - 6.0;
        let mut hi = q.abs() + 6.0;
        let mut best = 0.0;
        for pass in 0..2 {
            let n = if pass == 0 { 4000 } else { 2000 };
            let h = (hi - lo) / n as f64;
            let mut best_v = f64::INFINITY;
            for i in 0..=n {
                let a = lo + i as f64 * h;
                let v = (a - q).powi(2) / (2.0 * s) + law.conjugate(a).unwrap_or(f64::INFINITY);
                if v < best_v {
                    best_v = v;
                    best = a;
                }
            }
            lo = best - 2.0 * h;
            hi = best + 2.0 * h;
        }
        best
    }

    #[test]
    fn beta_examples() {
        let pm = EnergyLaw::porous_medium(1.0);
        assert_eq!(pm.at(0).beta(2.0), 2.0);
        assert_eq!(pm.at(0).beta(0.0), 0.0);
        let cm = EnergyLaw::crowd_motion(1.0);
        assert_eq!(cm.at(0).beta(0.5), 0.0);
        assert_eq!(cm.at(0).beta(1.5), f64::INFINITY);
        // zero on the negative axis for every family
        assert_eq!(pm.at(0).beta(-3.0), 0.0);
        assert_eq!(cm.at(0).beta(-3.0), 0.0);
        assert_eq!(EnergyLaw::quadratic().at(0).beta(2.0), 2.0);
    }

    #[test]
    fn conjugate_examples() {
        let pm = EnergyLaw::porous_medium(1.0);
        // brute-force check of the closed form
        let mut best = 0.0f64;
        for i in 0..=100_000 {
            let r = i as f64 * 1e-4;
            best = best.max(3.0 * r - pm.at(0).beta(r));
        }
        let v = pm.at(0).conjugate(3.0).unwrap();
        assert!((v - 4.5).abs() < 1e-12);
        assert!((v - best).abs() < 1e-7);
        assert_eq!(pm.at(0).conjugate(-1.0).unwrap(), 0.0);

        let cm = EnergyLaw::crowd_motion(1.0);
        let mut best = 0.0f64;
        for i in 0..=10_000 {
            let r = i as f64 * 1e-4;
            best = best.max(2.0 * r);
        }
        let v = cm.at(0).conjugate(2.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!((v - best).abs() < 1e-3);
    }

    #[test]
    fn subdiff_examples() {
        let pm2 = EnergyLaw::porous_medium(2.0);
        let iv = pm2.at(0).subdiff(3.0).unwrap();
        assert_eq!((iv.lo, iv.hi), (9.0, 9.0));

        let cm = EnergyLaw::crowd_motion(1.0);
        let iv = cm.at(0).subdiff(1.0).unwrap();
        assert_eq!(iv.lo, 0.0);
        assert_eq!(iv.hi, f64::INFINITY);

        let pm1 = EnergyLaw::porous_medium(1.0);
        let iv = pm1.at(0).subdiff(0.0).unwrap();
        assert_eq!(iv.lo, f64::NEG_INFINITY);
        assert_eq!(iv.hi, 0.0);

        assert!(pm1.at(0).subdiff(-0.5).is_err());
        assert!(cm.at(0).subdiff(1.5).is_err());
    }

    #[test]
    fn prox_conjugate_examples() {
        let pm = EnergyLaw::porous_medium(1.0);
        assert!((pm.at(0).prox_conjugate(1.0, 3.0) - 1.5).abs() < 1e-12);
        let cm = EnergyLaw::crowd_motion(1.0);
        assert!((cm.at(0).prox_conjugate(1.0, 3.0) - 2.0).abs() < 1e-12);
        assert!((cm.at(0).prox_conjugate(1.0, -1.0) - (-1.0)).abs() < 1e-12);
        assert_eq!(pm.at(0).prox_conjugate(1.0, 0.0), 0.0);
        assert_eq!(cm.at(0).prox_conjugate(1.0, 0.0), 0.0);
    }

    #[test]
    fn prox_coupled_examples() {
        let pm = EnergyLaw::porous_medium(1.0);
        let a = pm.at(0).prox_coupled(1.0, [3.0, 1.0]);
        assert!((a[0] - 1.5).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);

        let cm = EnergyLaw::crowd_motion(1.0);
        let a = cm.at(0).prox_coupled(1.0, [3.0, -1.0]);
        assert!((a[0] - 2.0).abs() < 1e-12 && (a[1] + 1.0).abs() < 1e-12);

        let a = pm.at(0).prox_coupled(1.0, [0.0, 0.0]);
        assert_eq!(a, [0.0, 0.0]);
    }

    #[test]
    fn prox_matches_grid_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let laws = [
            EnergyLaw::porous_medium(1.0),
            EnergyLaw::porous_medium(2.0),
            EnergyLaw::porous_medium(3.0),
            EnergyLaw::crowd_motion(1.0),
            EnergyLaw::new(LawFamily::QuadraticShifted { weight: 0.7, threshold: 0.8 }).unwrap(),
            EnergyLaw::new(LawFamily::Tabulated(
                TabulatedLaw::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.5, 2.0, 5.0], false)
                    .unwrap(),
            ))
            .unwrap(),
        ];
        for _ in 0..60 {
            let law = &laws[rng.gen_range(0..laws.len())];
            let p = law.at(0);
            let s = rng.gen_range(0.1..10.0);
            let q = rng.gen_range(-5.0..5.0);
            let got = p.prox_conjugate(s, q);
            let want = prox_conjugate_oracle(&p, s, q);
            assert!(
                (got - want).abs() < 5e-3,
                "{law:?} s={s} q={q}: got {got}, oracle {want}"
            );
        }
    }

    #[test]
    fn tabulated_conjugate_and_validation() {
        let t = TabulatedLaw::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0], false).unwrap();
        let law = EnergyLaw::new(LawFamily::Tabulated(t)).unwrap();
        let p = law.at(0);
        // beta* at q=1.5 attained at r=1: 1.5*1 - 1 = 0.5
        assert!((p.conjugate(1.5).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(p.conjugate(-2.0).unwrap(), 0.0);
        assert_eq!(p.beta(3.0), f64::INFINITY);

        let ext = TabulatedLaw::new(vec![0.0, 1.0], vec![0.0, 1.0], true).unwrap();
        let law = EnergyLaw::new(LawFamily::Tabulated(ext)).unwrap();
        assert!(law.at(0).conjugate(2.0).is_err());

        assert!(TabulatedLaw::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 3.0], false).is_err());
        assert!(TabulatedLaw::new(vec![0.5, 1.0], vec![0.0, 1.0], false).is_err());
    }

    #[test]
    fn membership_examples() {
        let pm = EnergyLaw::porous_medium(1.0);
        let p = pm.at(0);
        let rep = p.coupled_membership(GraphPoint { r: [1.0, 2.0], d: [3.0, 3.0] }, 1e-9);
        assert!(rep.member && rep.agree, "{rep:?}");

        let rep = p.coupled_membership(GraphPoint { r: [1.0, 2.0], d: [3.0, 2.0] }, 1e-9);
        assert!(!rep.member, "{rep:?}");

        let rep = p.coupled_membership(GraphPoint { r: [0.0, 0.0], d: [-1.0, 0.0] }, 1e-9);
        assert!(rep.member && rep.agree, "{rep:?}");
    }

    #[test]
    fn membership_swap_symmetry() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pm = EnergyLaw::porous_medium(2.0);
        for _ in 0..50 {
            let gp = GraphPoint {
                r: [rng.gen_range(-0.2..2.0), rng.gen_range(-0.2..2.0)],
                d: [rng.gen_range(-2.0..4.0), rng.gen_range(-2.0..4.0)],
            };
            let swapped = GraphPoint { r: [gp.r[1], gp.r[0]], d: [gp.d[1], gp.d[0]] };
            let a = pm.at(0).coupled_membership(gp, 1e-6);
            let b = pm.at(0).coupled_membership(swapped, 1e-6);
            assert_eq!(a.member, b.member);
        }
    }

    #[test]
    fn select_density_examples() {
        let pm = EnergyLaw::porous_medium(1.0);
        match pm.at(0).select_density([1.0, 3.0]) {
            DensitySelection::SecondOnly(iv) => assert_eq!((iv.lo, iv.hi), (3.0, 3.0)),
            other => panic!("unexpected selection {other:?}"),
        }
        match pm.at(0).select_density([0.0, 0.0]) {
            DensitySelection::Simplex(iv) => assert_eq!((iv.lo, iv.hi), (0.0, 0.0)),
            other => panic!("unexpected selection {other:?}"),
        }
        let cm = EnergyLaw::crowd_motion(1.0);
        match cm.at(0).select_density([2.0, 0.0]) {
            DensitySelection::FirstOnly(iv) => {
                // brute-force argmax of d . s - B(s) over a nonnegative grid
                let mut best = (0.0, f64::NEG_INFINITY);
                for i in 0..=400 {
                    let s1 = i as f64 * 0.005;
                    let v = 2.0 * s1 - cm.at(0).beta(s1);
                    if v > best.1 {
                        best = (s1, v);
                    }
                }
                assert!((iv.lo - best.0).abs() < 1e-2);
                assert_eq!((iv.lo, iv.hi), (1.0, 1.0));
            }
            other => panic!("unexpected selection {other:?}"),
        }
    }

    #[test]
    fn fenchel_young_inequality_sampled() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let laws = [
            EnergyLaw::porous_medium(1.0),
            EnergyLaw::porous_medium(3.0),
            EnergyLaw::quadratic(),
            EnergyLaw::new(LawFamily::QuadraticShifted { weight: 1.0, threshold: 0.5 }).unwrap(),
        ];
        for law in &laws {
            let p = law.at(0);
            for _ in 0..200 {
                let r = rng.gen_range(0.0..3.0);
                let q = rng.gen_range(-3.0..3.0);
                let lhs = q * r;
                let rhs = p.beta(r) + p.conjugate(q).unwrap();
                assert!(lhs <= rhs + 1e-10, "Fenchel-Young violated: {lhs} > {rhs}");
                // equality iff q in the subdifferential at r
                let in_sub = p.subdiff(r).unwrap().contains(q, 1e-9);
                let equal = (rhs - lhs).abs() <= 1e-9;
                if equal {
                    assert!(in_sub, "equality at r={r}, q={q} but q not in subdiff");
                }
                if in_sub {
                    assert!(rhs - lhs <= 1e-8, "subgradient without equality at r={r}, q={q}");
                }
            }
        }
    }

    #[test]
    fn graph_monotonicity_of_members() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pm = EnergyLaw::porous_medium(2.0);
        let p = pm.at(0);
        // build exact members via the inverse graph, then check monotonicity
        let mut members: Vec<GraphPoint> = Vec::new();
        while members.len() < 40 {
            let d: [f64; 2] = [rng.gen_range(-2.0..3.0), rng.gen_range(-2.0..3.0)];
            let gp = match p.select_density(d) {
                DensitySelection::SecondOnly(iv) => GraphPoint { r: [0.0, iv.lo], d },
                DensitySelection::FirstOnly(iv) => GraphPoint { r: [iv.lo, 0.0], d },
                DensitySelection::Simplex(iv) => {
                    let split = rng.gen_range(0.0..=1.0);
                    GraphPoint { r: [split * iv.lo, (1.0 - split) * iv.lo], d }
                }
            };
            let rep = p.coupled_membership(gp, 1e-7);
            assert!(rep.member, "constructed point must be a member: {gp:?} {rep:?}");
            members.push(gp);
        }
        for a in &members {
            for b in &members {
                let dd = [a.d[0] - b.d[0], a.d[1] - b.d[1]];
                let dr = [a.r[0] - b.r[0], a.r[1] - b.r[1]];
                let inner = dd[0] * dr[0] + dd[1] * dr[1];
                assert!(inner >= -1e-9, "monotonicity violated: {inner}");
            }
        }
    }

    #[test]
    fn max_potential_nonnegative_on_graph() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let laws = [EnergyLaw::porous_medium(1.0), EnergyLaw::crowd_motion(2.0)];
        for law in &laws {
            let p = law.at(0);
            for _ in 0..200 {
                let d: [f64; 2] = [rng.gen_range(-2.0..3.0), rng.gen_range(-2.0..3.0)];
                let gp = match p.select_density(d) {
                    DensitySelection::SecondOnly(iv) => GraphPoint { r: [0.0, iv.lo], d },
                    DensitySelection::FirstOnly(iv) => GraphPoint { r: [iv.lo, 0.0], d },
                    DensitySelection::Simplex(iv) => GraphPoint { r: [iv.lo, 0.0], d },
                };
                if p.coupled_membership(gp, 1e-9).member && gp.r[0] + gp.r[1] > 1e-12 {
                    assert!(gp.d[0].max(gp.d[1]) >= -1e-9);
                }
            }
        }
    }

    #[test]
    fn spatial_parameters_resolve_per_node() {
        let law = EnergyLaw::with_spatial(
            LawFamily::PorousMedium { exponent: 1.0 },
            SpatialParams { exponent: Some(vec![1.0, 2.0]), ..Default::default() },
        )
        .unwrap();
        assert_eq!(law.at(0).beta(2.0), 2.0);
        assert!((law.at(1).beta(2.0) - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn pinned_prox_agrees_with_restricted_grid_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let laws = [EnergyLaw::porous_medium(1.0), EnergyLaw::crowd_motion(1.0)];
        for _ in 0..40 {
            let law = &laws[rng.gen_range(0..laws.len())];
            let p = law.at(0);
            let s = rng.gen_range(0.2..4.0);
            let c = rng.gen_range(-2.0..2.0);
            let q2 = rng.gen_range(-4.0..4.0);
            let got = p.prox_coupled_pinned(s, c, q2);
            let mut best = (0.0, f64::INFINITY);
            for i in 0..=8000 {
                let a = -6.0 + i as f64 * 12.0 / 8000.0;
                let v = (a - q2).powi(2) / (2.0 * s)
                    + p.conjugate(c.max(a)).unwrap_or(f64::INFINITY);
                if v < best.1 {
                    best = (a, v);
                }
            }
            assert!((got - best.0).abs() < 5e-3, "pinned prox mismatch: {got} vs {}", best.0);
        }
    }
}
