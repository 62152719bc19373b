//! Harish-Chandra volumes of Cartan domains `K·exp(𝔇_t)·K`.
//!
//! All integrals are taken against Lebesgue measure in Killing-orthonormal
//! coordinates of 𝔞. Supported groups are SL(2, R) and SL(3, R).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WccError};
use crate::projections::GroupElement;
use crate::quadrature::{log_sinh, log_sum_exp, mapped, panels};
use crate::rootsys::{killing_norm_of, CartanVector, RootSystem};
use crate::sampling;

/// Default relative target for adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Ball,
    Parallelotope { edges: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub d: usize,
    pub kind: DomainKind,
    pub t: f64,
    /// Keep only `wall_distance > regular_margin`.
    pub regular_margin: Option<f64>,
    /// Keep only `wall_distance ≤ slab`.
    pub slab: Option<f64>,
}

impl Domain {
    pub fn ball(d: usize, t: f64) -> Self {
        Domain { d, kind: DomainKind::Ball, t, regular_margin: None, slab: None }
    }

    pub fn parallelotope(d: usize, t: f64, edges: Vec<f64>) -> Self {
        Domain { d, kind: DomainKind::Parallelotope { edges }, t, regular_margin: None, slab: None }
    }

    pub fn with_margin(mut self, m: f64) -> Self {
        self.regular_margin = Some(m);
        self
    }

    pub fn with_slab(mut self, s: f64) -> Self {
        self.slab = Some(s);
        self
    }

    pub fn with_t(&self, t: f64) -> Self {
        Domain { t, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.d) {
            return Err(WccError::Parameter(format!("volumes are implemented for d = 2, 3 (got {})", self.d)));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(WccError::Parameter(format!("t must be positive, got {}", self.t)));
        }
        if let DomainKind::Parallelotope { edges } = &self.kind {
            if edges.len() != self.d - 1 {
                return Err(WccError::Parameter(format!("expected {} edge lengths, got {}", self.d - 1, edges.len())));
            }
            if edges.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
                return Err(WccError::Parameter("edge lengths must be positive".into()));
            }
        }
        if self.regular_margin.is_some() && self.slab.is_some() {
            return Err(WccError::Parameter("slab and regular margin are mutually exclusive".into()));
        }
        if let Some(m) = self.regular_margin {
            if !(m >= 0.0) {
                return Err(WccError::Parameter(format!("regular margin must be non-negative, got {m}")));
            }
        }
        if let Some(s) = self.slab {
            if !(s > 0.0) {
                return Err(WccError::Parameter(format!("slab width must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Whether a chamber vector lies in `𝔇_t` with the margin/slab filter.
    pub fn contains(&self, y: &CartanVector) -> bool {
        let rs = RootSystem::cached(self.d);
        if !rs.in_closed_chamber(y) {
            return false;
        }
        let inside = match &self.kind {
            DomainKind::Ball => killing_norm_of(y) <= self.t,
            DomainKind::Parallelotope { edges } => {
                let rs_roots = rs.simple_roots();
                rs_roots.iter().zip(edges).all(|(r, e)| r.eval(y.as_slice()) <= self.t * e)
            }
        };
        if !inside {
            return false;
        }
        let w = rs.wall_distance_unchecked(y);
        match (self.regular_margin, self.slab) {
            (Some(m), _) => w > m,
            (_, Some(s)) => w <= s,
            _ => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentData {
    pub delta: f64,
    pub delta_minus: Option<f64>,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeResult {
    pub value: f64,
    pub value_log: f64,
    pub method: Method,
    pub error_estimate: f64,
    pub exponent_data: Option<ExponentData>,
}

impl VolumeResult {
    fn from_log(value_log: f64, method: Method, rel_err: f64) -> Self {
        let value = value_log.exp();
        VolumeResult { value, value_log, method, error_estimate: rel_err.abs() * value, exponent_data: None }
    }
}

/// `Π_{α>0} sinh(α(Y))` on the closed chamber.
pub fn hc_integrand(y: &CartanVector) -> Result<f64> {
    let rs = RootSystem::new(y.dim())?;
    if !rs.in_closed_chamber(y) {
        return Err(WccError::Precondition(format!("{:?} is outside the closed chamber", y.0)));
    }
    Ok(log_hc(rs.dim(), y.as_slice()).exp())
}

fn log_hc(d: usize, y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            s += log_sinh(y[i] - y[j]);
        }
    }
    s
}

fn two_rho(d: usize, y: &[f64]) -> f64 {
    y.iter().enumerate().map(|(i, v)| (d as f64 - 1.0 - 2.0 * i as f64) * v).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrand {
    /// `Π sinh α`.
    HarishChandra,
    /// `e^{2ρ}`, the upper bound used for slabs.
    TwoRho,
}

impl Integrand {
    fn log_eval(self, d: usize, y: &[f64]) -> f64 {
        match self {
            Integrand::HarishChandra => log_hc(d, y),
            Integrand::TwoRho => two_rho(d, y),
        }
    }
}

/// Polar geometry of the chamber in Killing-orthonormal coordinates.
struct Polar {
    d: usize,
    /// Angular range of the chamber (rank 2 only).
    phi: (f64, f64),
}

impl Polar {
    fn new(d: usize) -> Self {
        let rs = RootSystem::cached(d);
        if d == 2 {
            return Polar { d, phi: (0.0, 0.0) };
        }
        let w = rs.coweights();
        let ang = |v: &CartanVector| {
            let u = rs.to_killing_coords(v);
            u[1].atan2(u[0])
        };
        let (a, mut b) = (ang(&w[0]), ang(&w[1]));
        // take the short arc between the two coweight rays
        while b - a > std::f64::consts::PI {
            b -= 2.0 * std::f64::consts::PI;
        }
        while a - b > std::f64::consts::PI {
            b += 2.0 * std::f64::consts::PI;
        }
        let phi = if a < b { (a, b) } else { (b, a) };
        Polar { d, phi }
    }

    /// Unit Killing-norm direction.
    fn direction(&self, phi: f64) -> CartanVector {
        let rs = RootSystem::cached(self.d);
        if self.d == 2 {
            // the first Helmert vector already points into the chamber
            rs.from_killing_coords(&[1.0])
        } else {
            rs.from_killing_coords(&[phi.cos(), phi.sin()])
        }
    }

    /// Wall distance per unit radius along a direction.
    fn wall_rate(&self, phi: f64) -> f64 {
        RootSystem::cached(self.d).wall_distance_unchecked(&self.direction(phi))
    }
}

/// Radial range `[lo, hi]` of `𝔇_t` along a direction with the given wall rate.
fn radial_range(dom: &Domain, rate: f64) -> Option<(f64, f64)> {
    let mut lo = 0.0;
    let mut hi = dom.t;
    if let Some(m) = dom.regular_margin {
        lo = if rate > 0.0 { m / rate } else { f64::INFINITY };
    }
    if let Some(s) = dom.slab {
        if rate > 0.0 {
            hi = hi.min(s / rate);
        }
    }
    (hi > lo).then_some((lo, hi))
}

/// Angles where the radial range changes its formula.
fn breakpoints(p: &Polar, dom: &Domain) -> Vec<f64> {
    let (a, b) = p.phi;
    let mid = 0.5 * (a + b);
    let mut pts = vec![a, mid, b];
    let mut levels = Vec::new();
    if let Some(m) = dom.regular_margin {
        levels.push(m / dom.t);
    }
    if let Some(s) = dom.slab {
        levels.push(s / dom.t);
    }
    for level in levels {
        // the wall rate increases from the edge to the bisector on each half
        for (lo, hi) in [(a, mid), (b, mid)] {
            let f = |phi: f64| p.wall_rate(phi) - level;
            if f(lo) < 0.0 && f(hi) > 0.0 {
                let (mut x0, mut x1) = (lo, hi);
                for _ in 0..200 {
                    let xm = 0.5 * (x0 + x1);
                    if f(xm) < 0.0 {
                        x0 = xm;
                    } else {
                        x1 = xm;
                    }
                }
                pts.push(0.5 * (x0 + x1));
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    pts
}

/// Log of `∫_{𝔇_t} f` with `n` nodes per panel.
fn polar_log_integral(dom: &Domain, f: Integrand, n: usize) -> f64 {
    let p = Polar::new(dom.d);
    let radial = |phi: f64, terms: &mut Vec<f64>, log_w_phi: f64| {
        let dir = p.direction(phi);
        let Some((lo, hi)) = radial_range(dom, p.wall_rate(phi)) else { return };
        for (r0, r1) in panels(lo, hi, 1.0) {
            for (rho, w) in mapped(n, r0, r1) {
                let y: Vec<f64> = dir.0.iter().map(|v| v * rho).collect();
                let jac = (dom.d as f64 - 2.0) * rho.ln();
                terms.push(log_w_phi + w.ln() + jac + f.log_eval(dom.d, &y));
            }
        }
    };
    let mut terms = Vec::new();
    if dom.d == 2 {
        radial(0.0, &mut terms, 0.0);
    } else {
        let pts = breakpoints(&p, dom);
        for win in pts.windows(2) {
            for (ph0, ph1) in panels(win[0], win[1], 0.1) {
                for (phi, w) in mapped(n, ph0, ph1) {
                    radial(phi, &mut terms, w.ln());
                }
            }
        }
    }
    log_sum_exp(&terms)
}

/// Adaptive polar Gauss–Legendre: double node counts until successive
/// estimates agree to `tol` relative.
pub fn polar_volume(dom: &Domain, f: Integrand, tol: f64) -> Result<VolumeResult> {
    dom.validate()?;
    let mut n = 8;
    let mut prev = polar_log_integral(dom, f, n);
    loop {
        n *= 2;
        let cur = polar_log_integral(dom, f, n);
        let rel = if cur.is_finite() && prev.is_finite() { (cur - prev).exp_m1().abs() } else { 0.0 };
        if rel <= tol || n >= 256 {
            if rel > tol.max(1e-7) {
                return Err(WccError::Numeric(format!("quadrature did not converge: relative change {rel:.3e}")));
            }
            if cur == f64::NEG_INFINITY {
                return Ok(VolumeResult {
                    value: 0.0,
                    value_log: cur,
                    method: Method::Quadrature,
                    error_estimate: 0.0,
                    exponent_data: None,
                });
            }
            return Ok(VolumeResult::from_log(cur, Method::Quadrature, rel));
        }
        prev = cur;
    }
}

/// `√2(cosh(t/√2) − 1)`, the SL(2, R) ball volume.
pub fn ball_volume_sl2_closed_form(t: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    // cosh x − 1 = 2 sinh²(x/2) avoids cancellation for small t
    s * 2.0 * (t / (2.0 * s)).sinh().powi(2)
}

/// `vol(D_t)` for the ball domain.
pub fn ball_volume(d: usize, t: f64) -> Result<VolumeResult> {
    volume(&Domain::ball(d, t))
}

/// Volume of any supported domain, by exact expansion for parallelotopes
/// and polar quadrature for balls.
pub fn volume(dom: &Domain) -> Result<VolumeResult> {
    dom.validate()?;
    match &dom.kind {
        DomainKind::Ball => {
            let mut res = polar_volume(dom, Integrand::HarishChandra, QUAD_TOL)?;
            let rs = RootSystem::cached(dom.d);
            let r = rs.rank() as f64;
            let delta = rs.delta0();
            if dom.regular_margin.is_none() && dom.slab.is_none() {
                res.exponent_data = Some(ExponentData {
                    delta,
                    delta_minus: None,
                    c: (res.value_log - delta * dom.t - 0.5 * (r - 1.0) * dom.t.ln()).exp(),
                });
            }
            Ok(res)
        }
        DomainKind::Parallelotope { .. } => {
            let b = BoxExpansion::new(dom)?;
            let mut res = VolumeResult::from_log(b.log_value(), Method::ClosedForm, 1e-15);
            res.exponent_data = Some(ExponentData { delta: b.delta_p, delta_minus: b.delta_minus, c: b.c_g });
            Ok(res)
        }
    }
}

/// Exact expansion of `∫ Π sinh α` over a box in simple-root dual coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct BoxExpansion {
    /// Per simple root `[lo_β, hi_β]` in the coordinate `y_β = β(Y)`.
    pub bounds: Vec<(f64, f64)>,
    pub j_pi: f64,
    pub c_g: f64,
    pub delta_p: f64,
    pub delta_minus: Option<f64>,
    /// `(sign, exponents n_β(ω))` for each term of `Π (e^α − e^{−α})`.
    terms: Vec<(f64, Vec<i64>)>,
    n_pos: usize,
    t: f64,
}

impl BoxExpansion {
    pub fn new(dom: &Domain) -> Result<Self> {
        dom.validate()?;
        let DomainKind::Parallelotope { edges } = &dom.kind else {
            return Err(WccError::Parameter("box expansion needs a parallelotope domain".into()));
        };
        let rs = RootSystem::cached(dom.d);
        let r = rs.rank();
        let sq = (dom.d as f64).sqrt();
        let hi: Vec<f64> = edges.iter().map(|e| dom.t * e).collect();
        let lo_margin = dom.regular_margin.map(|m| m / sq).unwrap_or(0.0);
        let bounds: Vec<(f64, f64)> = hi.iter().map(|&h| (lo_margin.min(h), h)).collect();
        let roots = rs.positive_roots();
        let coeffs: Vec<Vec<u32>> = roots.iter().map(|a| a.simple_coefficients(dom.d)).collect();
        let mut terms = Vec::new();
        for mask in 0..(1u32 << roots.len()) {
            let mut n = vec![0i64; r];
            let mut sign = 1.0;
            for (k, c) in coeffs.iter().enumerate() {
                let s = if mask >> k & 1 == 1 { -1 } else { 1 };
                if s < 0 {
                    sign = -sign;
                }
                for (nb, cb) in n.iter_mut().zip(c) {
                    *nb += s * *cb as i64;
                }
            }
            terms.push((sign, n));
        }
        let two_rho = rs.two_rho_simple_coefficients();
        let j_pi = rs.jacobian_simple();
        let c_g = j_pi / (2f64.powi(roots.len() as i32) * two_rho.iter().map(|&v| v as f64).product::<f64>());
        let delta_p: f64 = two_rho.iter().zip(edges).map(|(&n, a)| n as f64 * a).sum();
        let mut b = BoxExpansion {
            bounds,
            j_pi,
            c_g,
            delta_p,
            delta_minus: None,
            terms,
            n_pos: roots.len(),
            t: dom.t,
        };
        b.delta_minus = b.subleading_rate(edges);
        Ok(b)
    }

    /// Largest exponential rate below `δ_𝒫` that survives grouping.
    fn subleading_rate(&self, edges: &[f64]) -> Option<f64> {
        // each term expands into Π_β over {e^{n_β L_β}, −1} (or L_β when n_β = 0)
        let mut groups: Vec<(f64, usize, f64)> = Vec::new();
        for (sign, n) in &self.terms {
            let r = n.len();
            for pick in 0..(1u32 << r) {
                let mut rate = 0.0;
                let mut degree = 0;
                let mut coef = *sign;
                let mut skip = false;
                for b in 0..r {
                    let nb = n[b] as f64;
                    if n[b] == 0 {
                        if pick >> b & 1 == 1 {
                            skip = true;
                            break;
                        }
                        degree += 1;
                        coef *= edges[b];
                    } else if pick >> b & 1 == 1 {
                        rate += nb * edges[b];
                        coef /= nb;
                    } else {
                        coef *= -1.0 / nb;
                    }
                }
                if skip {
                    continue;
                }
                match groups.iter_mut().find(|g| (g.0 - rate).abs() < 1e-12 && g.1 == degree) {
                    Some(g) => g.2 += coef,
                    None => groups.push((rate, degree, coef)),
                }
            }
        }
        groups
            .into_iter()
            .filter(|g| g.2.abs() > 1e-12 && g.0 < self.delta_p - 1e-12)
            .map(|g| g.0)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }

    /// `log vol` from the exact finite sum.
    pub fn log_value(&self) -> f64 {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (sign, n) in &self.terms {
            let mut lp = 0.0;
            let mut s = *sign;
            for (b, &nb) in n.iter().enumerate() {
                let (lo, hi) = self.bounds[b];
                let (ls, sg) = log_exp_integral(nb as f64, lo, hi);
                lp += ls;
                s *= sg;
            }
            if s > 0.0 {
                pos.push(lp);
            } else {
                neg.push(lp);
            }
        }
        let p = log_sum_exp(&pos);
        let q = log_sum_exp(&neg);
        let diff = if q == f64::NEG_INFINITY { p } else { p + (-(q - p).exp()).ln_1p() };
        diff + self.j_pi.ln() - (self.n_pos as f64) * std::f64::consts::LN_2
    }

    /// Main term `C_G e^{δ_𝒫 t}`.
    pub fn main_term(&self) -> f64 {
        self.c_g * (self.delta_p * self.t).exp()
    }
}

/// `(log |I|, sign I)` for `I = ∫_lo^hi e^{n y} dy`.
fn log_exp_integral(n: f64, lo: f64, hi: f64) -> (f64, f64) {
    if hi <= lo {
        return (f64::NEG_INFINITY, 1.0);
    }
    if n == 0.0 {
        return ((hi - lo).ln(), 1.0);
    }
    // (e^{n hi} − e^{n lo})/n = e^{n·top}·(1 − e^{−|n|(hi−lo)})/|n|
    let top = if n > 0.0 { n * hi } else { n * lo };
    let v = top + (-(-(n.abs()) * (hi - lo)).exp_m1()).ln() - n.abs().ln();
    (v, 1.0)
}

/// Tensor Gauss–Legendre in simple-root dual coordinates, as an
/// independent check of the exact expansion.
pub fn box_quadrature(dom: &Domain, f: Integrand, tol: f64) -> Result<VolumeResult> {
    let b = BoxExpansion::new(dom)?;
    let rs = RootSystem::cached(dom.d);
    let w = rs.coweights();
    let eval = |n: usize| -> f64 {
        let mut terms = Vec::new();
        let grids: Vec<Vec<(f64, f64)>> = b
            .bounds
            .iter()
            .map(|&(lo, hi)| panels(lo, hi, 1.0).into_iter().flat_map(|(a, c)| mapped(n, a, c).collect::<Vec<_>>()).collect())
            .collect();
        let r = grids.len();
        let mut idx = vec![0usize; r];
        if grids.iter().any(|g| g.is_empty()) {
            return f64::NEG_INFINITY;
        }
        loop {
            let mut y = vec![0.0; dom.d];
            let mut lw = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                let (yk, wk) = grids[k][i];
                lw += wk.ln();
                for (yj, c) in y.iter_mut().zip(&w[k].0) {
                    *yj += yk * c;
                }
            }
            terms.push(lw + f.log_eval(dom.d, &y));
            let mut k = 0;
            loop {
                if k == r {
                    return log_sum_exp(&terms) + b.j_pi.ln();
                }
                idx[k] += 1;
                if idx[k] < grids[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    };
    let mut n = 8;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let cur = eval(n);
        let rel = if cur.is_finite() { (cur - prev).exp_m1().abs() } else { 0.0 };
        if rel <= tol || n >= 128 {
            return Ok(VolumeResult::from_log(cur, Method::Quadrature, rel));
        }
        prev = cur;
    }
}

/// `(C_G, δ_𝒫, δ⁻)` of a parallelotope with the given edges.
pub fn box_constants(d: usize, edges: &[f64]) -> Result<(f64, f64, Option<f64>)> {
    let b = BoxExpansion::new(&Domain::parallelotope(d, 1.0, edges.to_vec()))?;
    Ok((b.c_g, b.delta_p, b.delta_minus))
}

/// `sup_𝒫 2ρ` by enumerating the vertices of the unit parallelotope.
pub fn delta_p_by_vertices(d: usize, edges: &[f64]) -> f64 {
    let rs = RootSystem::cached(d);
    let w = rs.coweights();
    let mut best = f64::NEG_INFINITY;
    for mask in 0..(1u32 << edges.len()) {
        let mut y = CartanVector::zeros(d);
        for (k, e) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                y = &y + &w[k].scale(*e);
            }
        }
        best = best.max(two_rho(d, y.as_slice()));
    }
    best
}

/// `vol(D_t)` for either domain kind.
pub fn box_volume(d: usize, t: f64, edges: &[f64]) -> Result<VolumeResult> {
    volume(&Domain::parallelotope(d, t, edges.to_vec()))
}

#[derive(Clone, Debug, Serialize)]
pub struct SlabResult {
    pub t: f64,
    pub s: f64,
    /// `log ∫_{𝔇_t^s} e^{2ρ}`.
    pub slab_log: f64,
    pub volume_log: f64,
    pub ratio: f64,
}

/// `∫_{𝔇_t^s} e^{2ρ}` and its ratio to `vol(D_t)`.
pub fn slab_volume(dom: &Domain, s: f64) -> Result<SlabResult> {
    if !(s > 0.0 && s < dom.t) {
        return Err(WccError::Parameter(format!("slab width must lie in (0, t), got s = {s}, t = {}", dom.t)));
    }
    let base = Domain { regular_margin: None, slab: None, ..dom.clone() };
    let vol = volume(&base)?;
    let slab_log = match &dom.kind {
        DomainKind::Ball => polar_volume(&base.clone().with_slab(s), Integrand::TwoRho, QUAD_TOL)?.value_log,
        DomainKind::Parallelotope { edges } => {
            // box minus the sub-box where every y_β > s/√d
            let rs = RootSystem::cached(dom.d);
            let two_rho = rs.two_rho_simple_coefficients();
            let cut = s / (dom.d as f64).sqrt();
            let full: f64 = two_rho.iter().zip(edges).map(|(&n, e)| log_exp_integral(n as f64, 0.0, dom.t * e).0).sum();
            let inner: f64 =
                two_rho.iter().zip(edges).map(|(&n, e)| log_exp_integral(n as f64, cut, dom.t * e).0).sum();
            let diff = if inner == f64::NEG_INFINITY { full } else { full + (-(inner - full).exp()).ln_1p() };
            diff + rs.jacobian_simple().ln()
        }
    };
    Ok(SlabResult { t: dom.t, s, slab_log, volume_log: vol.value_log, ratio: (slab_log - vol.value_log).exp() })
}

#[derive(Clone, Debug, Serialize)]
pub struct SlabSweep {
    pub epsilon: f64,
    pub rows: Vec<SlabResult>,
    pub strictly_decreasing: bool,
    /// Fitted `κ` in `ratio ≈ C·vol(D_t)^{−κ}`.
    pub kappa: f64,
}

/// Slab ratios with `s = εt` across a `t` grid, and the fitted decay exponent.
pub fn slab_sweep(dom: &Domain, epsilon: f64, t_grid: &[f64]) -> Result<SlabSweep> {
    let rows = t_grid.iter().map(|&t| slab_volume(&dom.with_t(t), epsilon * t)).collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = rows.windows(2).all(|w| w[1].ratio < w[0].ratio);
    let xs: Vec<f64> = rows.iter().map(|r| r.volume_log).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let (slope, _) = crate::stats::linear_fit(&xs, &ys);
    Ok(SlabSweep { epsilon, rows, strictly_decreasing, kappa: -slope })
}

/// Monte-Carlo estimate from uniform samples in a bounding box.
pub fn monte_carlo(dom: &Domain, f: Integrand, samples: usize, seed: u64) -> Result<VolumeResult> {
    dom.validate()?;
    let rs = RootSystem::cached(dom.d);
    let r = rs.rank();
    let mut rng = sampling::rng(seed);
    let (lo, hi, to_y): (Vec<f64>, Vec<f64>, Box<dyn Fn(&[f64]) -> CartanVector>) = match &dom.kind {
        DomainKind::Ball => (vec![-dom.t; r], vec![dom.t; r], Box::new(move |u: &[f64]| rs.from_killing_coords(u))),
        DomainKind::Parallelotope { edges } => {
            let w = rs.coweights();
            let hi: Vec<f64> = edges.iter().map(|e| dom.t * e).collect();
            (
                vec![0.0; r],
                hi,
                Box::new(move |c: &[f64]| {
                    let mut y = CartanVector::zeros(rs.dim());
                    for (k, ck) in c.iter().enumerate() {
                        y = &y + &w[k].scale(*ck);
                    }
                    y
                }),
            )
        }
    };
    // box coordinates are simple-root coordinates for parallelotopes
    let jac = match dom.kind {
        DomainKind::Ball => 1.0,
        DomainKind::Parallelotope { .. } => rs.jacobian_simple(),
    };
    let box_vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product::<f64>() * jac;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut point = vec![0.0; r];
    for _ in 0..samples {
        for k in 0..r {
            point[k] = rng.random_range(lo[k]..hi[k]);
        }
        let y = to_y(&point);
        let v = if dom.contains(&y) { f.log_eval(dom.d, y.as_slice()).exp() } else { 0.0 };
        sum += v;
        sum2 += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    let value = mean * box_vol;
    Ok(VolumeResult {
        value,
        value_log: value.ln(),
        method: Method::MonteCarlo,
        error_estimate: box_vol * (var / n).sqrt(),
        exponent_data: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    /// Fitted `δ` in `log vol(D_t) ≈ δt + ((r−1)/2)·log t + b + c/t`.
    pub slope: f64,
    /// Plain least-squares slope of `log vol(D_t) − ((r−1)/2)·log t`.
    pub linear_slope: f64,
    /// Plain slope of `log vol(D_t)` with no prefactor correction.
    pub raw_slope: f64,
    pub delta0: f64,
    pub relative_error: f64,
}

/// Fitted exponential growth rate of the ball volume on `[t_lo, t_hi]`.
pub fn ball_growth_fit(d: usize, t_lo: f64, t_hi: f64, points: usize) -> Result<GrowthFit> {
    let rs = RootSystem::cached(d);
    let r = rs.rank() as f64;
    let ts: Vec<f64> = (0..points).map(|i| t_lo + (t_hi - t_lo) * i as f64 / (points - 1) as f64).collect();
    let logs = ts.iter().map(|&t| Ok(ball_volume(d, t)?.value_log)).collect::<Result<Vec<_>>>()?;
    let corrected: Vec<f64> = logs.iter().zip(&ts).map(|(l, t)| l - 0.5 * (r - 1.0) * t.ln()).collect();
    let cols = vec![ts.clone(), vec![1.0; ts.len()], ts.iter().map(|t| 1.0 / t).collect()];
    let slope = crate::stats::least_squares(&cols, &corrected)[0];
    let (linear_slope, _) = crate::stats::linear_fit(&ts, &corrected);
    let (raw_slope, _) = crate::stats::linear_fit(&ts, &logs);
    Ok(GrowthFit {
        slope,
        linear_slope,
        raw_slope,
        delta0: rs.delta0(),
        relative_error: (slope - rs.delta0()).abs() / rs.delta0(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    /// `(t, ε, (log vol(D_{t+ε}) − log vol(D_t))/ε)`.
    pub rows: Vec<(f64, f64, f64)>,
    pub c: f64,
    /// `(t, max over ε)` per grid point.
    pub per_t: Vec<(f64, f64)>,
    pub finite: bool,
    /// Largest relative change of the quotient when `ε` halves, per `t`.
    pub halving_change: Vec<(f64, f64)>,
}

pub fn lipschitz_probe(dom: &Domain, t_grid: &[f64], eps_grid: &[f64]) -> Result<LipschitzReport> {
    if t_grid.iter().any(|&t| t <= 1.0) {
        return Err(WccError::Parameter("the Lipschitz bound is only claimed for t > 1".into()));
    }
    let mut rows = Vec::new();
    let mut halving_change = Vec::new();
    let mut eps = eps_grid.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    for &t in t_grid {
        let base = volume(&dom.with_t(t))?.value_log;
        let mut qs = Vec::new();
        for &e in &eps {
            let q = (volume(&dom.with_t(t + e))?.value_log - base) / e;
            rows.push((t, e, q));
            qs.push((e, q));
        }
        let mut worst = 0.0f64;
        for a in &qs {
            if let Some(b) = qs.iter().find(|b| (b.0 - 0.5 * a.0).abs() < 1e-12 * a.0) {
                worst = worst.max((b.1 - a.1).abs() / a.1.abs());
            }
        }
        halving_change.push((t, worst));
    }
    let per_t: Vec<(f64, f64)> = t_grid
        .iter()
        .map(|&t| (t, rows.iter().filter(|r| r.0 == t).map(|r| r.2).fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    let c = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    Ok(LipschitzReport { finite: c.is_finite(), c, per_t, rows, halving_change })
}

#[derive(Clone, Debug, Serialize)]
pub struct WellRoundedReport {
    pub t: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub samples: usize,
    /// Sampled `o₁ g o₂` that stayed inside `S⁺`.
    pub inside: usize,
    pub condition_a: bool,
    pub vol_s: f64,
    pub vol_plus: f64,
    pub vol_minus: f64,
    /// `vol(S⁺ − S⁻)/(ε·vol(S_t))`, or 0 when ε = 0.
    pub c: f64,
}

/// Checks `𝒪_ε S_t 𝒪_ε ⊂ S⁺` by sampling and reports the volume sandwich
/// constant for `S_t = D_t ∩ K Ã^δ K`, `S^± = D_{t±ε}` with margin `δ ∓ ε`.
pub fn well_rounded_probe(dom: &Domain, delta: f64, epsilon: f64, samples: usize, seed: u64) -> Result<WellRoundedReport> {
    if !(epsilon >= 0.0 && delta > epsilon) {
        return Err(WccError::Parameter("need 0 ≤ ε < δ".into()));
    }
    let d = dom.d;
    let base = Domain { regular_margin: None, slab: None, ..dom.clone() };
    let s_t = base.clone().with_margin(delta);
    let s_plus = base.with_t(dom.t + epsilon).with_margin(delta - epsilon);
    let s_minus = base.with_t(dom.t - epsilon).with_margin(delta + epsilon);
    let vol_s = volume(&s_t)?.value;
    let vol_plus = volume(&s_plus)?.value;
    let vol_minus = volume(&s_minus)?.value;
    let c = if epsilon == 0.0 { 0.0 } else { (vol_plus - vol_minus) / (epsilon * vol_s) };

    let rs = RootSystem::cached(d);
    let mut rng = sampling::rng(seed);
    let mut inside = 0;
    let mut drawn = 0;
    while drawn < samples {
        let y = rs.to_chamber(&sampling::random_cartan(&mut rng, d, dom.t));
        if !s_t.contains(&y) {
            continue;
        }
        drawn += 1;
        let k1 = GroupElement::from_orthogonal(sampling::haar_so(&mut rng, d));
        let k2 = GroupElement::from_orthogonal(sampling::haar_so(&mut rng, d));
        let g = k1.mul(&GroupElement::exp_cartan(&y)).mul(&k2);
        // each perturbation moves o by at most ε/2
        let scale = (2.0 * d as f64).sqrt();
        let (u1, u2): (f64, f64) = (rng.random(), rng.random());
        let o1 = sampling::near_identity(&mut rng, d, 0.5 * epsilon / scale * u1).0;
        let o2 = sampling::near_identity(&mut rng, d, 0.5 * epsilon / scale * u2).0;
        let a = o1.mul(&g).mul(&o2).cartan().a.clone();
        if s_plus.contains(&a) {
            inside += 1;
        }
    }
    Ok(WellRoundedReport {
        t: dom.t,
        delta,
        epsilon,
        samples,
        inside,
        condition_a: inside == samples,
        vol_s,
        vol_plus,
        vol_minus,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrand_examples() {
        assert_eq!(hc_integrand(&CartanVector(vec![0.0, 0.0, 0.0])).unwrap(), 0.0);
        let s = 0.7;
        assert!((hc_integrand(&CartanVector(vec![s, -s])).unwrap() - (2.0 * s).sinh()).abs() < 1e-15);
        let v = hc_integrand(&CartanVector(vec![1.0, 0.0, -1.0])).unwrap();
        assert!((v - 1f64.sinh().powi(2) * 2f64.sinh()).abs() < 1e-14);
        assert!(hc_integrand(&CartanVector(vec![-1.0, 1.0])).is_err());
    }

    #[test]
    fn sl2_ball_matches_closed_form() {
        for t in [0.5, 1.0, 4.0, 8.0] {
            let q = ball_volume(2, t).unwrap().value;
            let c = ball_volume_sl2_closed_form(t);
            assert!((q / c - 1.0).abs() < 1e-12, "t = {t}: {q} vs {c}");
        }
        assert!((ball_volume_sl2_closed_form(1.0) - 0.3685325).abs() < 1e-7);
        assert!(ball_volume(2, 1e-6).unwrap().value < 1e-12);
    }

    #[test]
    fn rank_one_box_is_cosh() {
        let (t, a) = (3.0, 0.8);
        let res = box_volume(2, t, &[a]).unwrap();
        let j = RootSystem::cached(2).jacobian_simple();
        assert!((res.value / (j * ((t * a).cosh() - 1.0)) - 1.0).abs() < 1e-13);
        let b = BoxExpansion::new(&Domain::parallelotope(2, t, vec![a])).unwrap();
        // the leading term of the expansion, 2^{-1} J (e^{t n a} − 1)/n with n = 1
        let lead = 0.5 * j * ((t * a).exp() - 1.0);
        assert!((b.main_term() - 0.5 * j * (t * a).exp()).abs() < 1e-12);
        assert!((res.value - lead).abs() < 0.5 * j * 1.0);
    }

    #[test]
    fn box_expansion_matches_quadrature_sl3() {
        let dom = Domain::parallelotope(3, 5.0, vec![1.0, 1.0]);
        let exact = volume(&dom).unwrap().value;
        let quad = box_quadrature(&dom, Integrand::HarishChandra, 1e-12).unwrap().value;
        assert!((exact / quad - 1.0).abs() < 1e-10);
        let (c_g, dp, dm) = box_constants(3, &[1.0, 1.0]).unwrap();
        assert!((dp - delta_p_by_vertices(3, &[1.0, 1.0])).abs() < 1e-12);
        assert!((dp - 4.0).abs() < 1e-12);
        assert!(dm.unwrap() < dp && dm.unwrap() > 0.0);
        assert!(c_g > 0.0);
    }

    #[test]
    fn polar_box_and_ball_agree_when_box_is_used_as_ball_check() {
        // the ball through quadrature must exceed the inscribed parallelotope
        let ball = ball_volume(3, 3.0).unwrap().value;
        let small = box_volume(3, 1.0, &[1.0, 1.0]).unwrap().value;
        assert!(ball > small);
    }

    #[test]
    fn margin_and_slab_partition_the_ball() {
        for d in [2, 3] {
            let t = 4.0;
            let s = 1.3;
            let all = polar_volume(&Domain::ball(d, t), Integrand::TwoRho, 1e-12).unwrap().value;
            let slab = polar_volume(&Domain::ball(d, t).with_slab(s), Integrand::TwoRho, 1e-12).unwrap().value;
            let reg = polar_volume(&Domain::ball(d, t).with_margin(s), Integrand::TwoRho, 1e-12).unwrap().value;
            assert!(((slab + reg) / all - 1.0).abs() < 1e-10, "d = {d}");
        }
    }

    #[test]
    fn monte_carlo_agrees_within_three_se() {
        for dom in [Domain::ball(3, 3.0), Domain::parallelotope(3, 2.0, vec![1.0, 0.5])] {
            let exact = volume(&dom).unwrap();
            let mc = monte_carlo(&dom, Integrand::HarishChandra, 200_000, 5).unwrap();
            assert!((mc.value - exact.value).abs() < 3.0 * mc.error_estimate, "{mc:?} vs {exact:?}");
        }
    }

    #[test]
    fn slab_sl2_oracle() {
        // for rank one the wall distance equals the Killing radius
        let (t, s) = (6.0, 1.5);
        let got = slab_volume(&Domain::ball(2, t), s).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        let slab = r2 * ((s / r2).exp() - 1.0);
        assert!((got.slab_log.exp() / slab - 1.0).abs() < 1e-10);
        assert!((got.ratio - slab / ball_volume_sl2_closed_form(t)).abs() < 1e-12);
        assert!(slab_volume(&Domain::ball(2, t), t).is_err());
        let near = slab_volume(&Domain::ball(2, t), t - 1e-9).unwrap();
        assert!(near.ratio > 0.9);
    }

    #[test]
    fn volume_is_monotone() {
        for dom in [Domain::ball(3, 1.0), Domain::parallelotope(3, 1.0, vec![1.0, 2.0])] {
            let v: Vec<f64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&t| volume(&dom.with_t(t)).unwrap().value).collect();
            assert!(v.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn growth_fit_recovers_delta0() {
        for d in [2, 3] {
            let f = ball_growth_fit(d, 8.0, 12.0, 9).unwrap();
            assert!(f.relative_error < 0.02, "d = {d}: {f:?}");
        }
    }

    #[test]
    fn lipschitz_constant_near_delta0_for_sl2() {
        let r = lipschitz_probe(&Domain::ball(2, 1.0), &[10.0], &[0.01, 0.005, 0.002, 0.001]).unwrap();
        let d0 = RootSystem::cached(2).delta0();
        assert!(r.finite && (r.c / d0 - 1.0).abs() < 0.1);
        assert!(r.halving_change[0].1 < 0.05);
        assert!(lipschitz_probe(&Domain::ball(2, 1.0), &[0.5], &[0.01]).is_err());
    }

    #[test]
    fn well_rounded_zero_epsilon() {
        let r = well_rounded_probe(&Domain::ball(2, 3.0), 0.5, 0.0, 20, 1).unwrap();
        assert_eq!(r.c, 0.0);
        assert!((r.vol_plus - r.vol_minus).abs() < 1e-12 * r.vol_s);
    }
}
