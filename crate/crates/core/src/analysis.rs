//! Fractional Sobolev norms in time, error functionals, slope fits and the δ-sweep.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::boundary::WallData;
use crate::error::{Error, Result};
use crate::grid::{deformation, velocity_norms, VelocityField};
use crate::nse::{solve_noslip, solve_split, GronwallLedger, NseConfig, StepDiagnostics, Trajectory};
use crate::stokes::{solve_linear_evolution, LinearEvolution, LinearParams, StationaryStokes};

/// Ratio of the transform window to the series length.
pub const PADDING_FACTOR: usize = 4;
pub const PARSEVAL_RTOL: f64 = 1e-10;
/// Fits with a lower coefficient of determination are inconclusive.
pub const MIN_R2: f64 = 0.95;

/// A sampled function of time on `[0, T]`, one or many weighted channels.
pub trait Series {
    fn dt(&self) -> f64;
    /// Number of time levels, `nt + 1`.
    fn len(&self) -> usize;
    fn channels(&self) -> usize;
    /// Copies channel `c` into `out` (length [`Series::len`]) and returns its weight.
    fn channel(&self, c: usize, out: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        check_series(values.len(), dt)?;
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("time series has non-finite values".into()));
        }
        Ok(Self { values, dt })
    }

    pub fn t_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }
}

impl Series for TimeSeries {
    fn dt(&self) -> f64 {
        self.dt
    }
    fn len(&self) -> usize {
        self.values.len()
    }
    fn channels(&self) -> usize {
        1
    }
    fn channel(&self, _c: usize, out: &mut [f64]) -> f64 {
        out.copy_from_slice(&self.values);
        1.0
    }
}

/// Field-valued series: every degree of freedom is a channel with its quadrature weight.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub weights: Vec<f64>,
    /// `samples[c][n]`
    pub samples: Vec<Vec<f64>>,
    pub dt: f64,
}

impl FieldSeries {
    pub fn new(weights: Vec<f64>, samples: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        if weights.len() != samples.len() {
            return Err(Error::Mismatch("one weight per channel required".into()));
        }
        let len = samples.first().map_or(0, Vec::len);
        check_series(len, dt)?;
        if samples.iter().any(|s| s.len() != len) {
            return Err(Error::Mismatch("channels differ in length".into()));
        }
        if samples.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("field series has non-finite values".into()));
        }
        Ok(Self { weights, samples, dt })
    }

    pub fn from_velocity(fields: &[VelocityField], dt: f64) -> Result<Self> {
        let Some(first) = fields.first() else {
            return Err(Error::InvalidInput("empty field series".into()));
        };
        if fields.iter().any(|f| f.grid != first.grid) {
            return Err(Error::Mismatch("fields on different grids".into()));
        }
        let dofs0 = first.weighted_dofs();
        let weights = dofs0.iter().map(|d| d.1).collect();
        let mut samples = vec![Vec::with_capacity(fields.len()); dofs0.len()];
        for f in fields {
            for (c, (x, _)) in f.weighted_dofs().into_iter().enumerate() {
                samples[c].push(x);
            }
        }
        Self::new(weights, samples, dt)
    }

    /// Flux on both walls, weighted by `hx`.
    pub fn from_wall(w: &WallData) -> Result<Self> {
        let hx = w.hx();
        let mut samples = Vec::with_capacity(2 * w.nx());
        for g in [&w.g_bottom, &w.g_top] {
            for col in g.columns() {
                samples.push(col.to_vec());
            }
        }
        Self::new(vec![hx; samples.len()], samples, w.dt)
    }
}

impl Series for FieldSeries {
    fn dt(&self) -> f64 {
        self.dt
    }
    fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }
    fn channels(&self) -> usize {
        self.samples.len()
    }
    fn channel(&self, c: usize, out: &mut [f64]) -> f64 {
        out.copy_from_slice(&self.samples[c]);
        self.weights[c]
    }
}

fn check_series(len: usize, dt: f64) -> Result<()> {
    if len < 8 {
        return Err(Error::InvalidInput(format!("spectral operations need at least 8 samples, got {len}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Discrete spectrum of the zero-extended series.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Angular frequencies, wrapped to `[-pi/dt, pi/dt)`.
    pub xi: Vec<f64>,
    /// Channel-weighted `|f_hat(xi)|^2`.
    pub power: Vec<f64>,
    pub dxi: f64,
}

/// Transforms the series on a window `PADDING_FACTOR` times its length with
/// `f_hat = dt / sqrt(2 pi) * FFT(f)` and checks Parseval against the time-domain sum.
pub fn spectrum<S: Series + ?Sized>(s: &S) -> Result<Spectrum> {
    let n = s.len();
    check_series(n, s.dt())?;
    let dt = s.dt();
    let window = PADDING_FACTOR * n;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    let mut vals = vec![0.0; n];
    let mut power = vec![0.0; window];
    let mut time_sq = 0.0;
    let scale = dt * dt / (2.0 * PI);
    for c in 0..s.channels() {
        let w = s.channel(c, &mut vals);
        if vals.iter().all(|&x| x == 0.0) {
            continue;
        }
        time_sq += w * dt * vals.iter().map(|x| x * x).sum::<f64>();
        for (b, &x) in buf.iter_mut().zip(vals.iter().chain(std::iter::repeat(&0.0))) {
            *b = Complex64::new(x, 0.0);
        }
        fft.process(&mut buf);
        for (p, b) in power.iter_mut().zip(&buf) {
            *p += w * scale * b.norm_sqr();
        }
    }
    let dxi = 2.0 * PI / (window as f64 * dt);
    let xi = (0..window)
        .map(|j| {
            let k = if j < window.div_ceil(2) { j as f64 } else { j as f64 - window as f64 };
            k * dxi
        })
        .collect();
    let freq_sq: f64 = power.iter().sum::<f64>() * dxi;
    if (freq_sq - time_sq).abs() > PARSEVAL_RTOL * time_sq {
        return Err(Error::Numerical(format!(
            "Parseval check failed: {freq_sq:e} in frequency vs {time_sq:e} in time"
        )));
    }
    Ok(Spectrum { xi, power, dxi })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

fn seminorm_sq(sp: &Spectrum, alpha: f64) -> f64 {
    sp.xi
        .iter()
        .zip(&sp.power)
        .map(|(x, p)| if *x == 0.0 && alpha > 0.0 { 0.0 } else { x.abs().powf(2.0 * alpha) * p })
        .sum::<f64>()
        * sp.dxi
}

/// `(int |xi|^{2 alpha} ||f_hat||^2 dxi)^{1/2}`
pub fn fractional_seminorm<S: Series + ?Sized>(s: &S, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(seminorm_sq(&spectrum(s)?, alpha).sqrt())
}

/// Full `H^alpha(0, T)` norm: L2 part plus seminorm.
pub fn fractional_norm<S: Series + ?Sized>(s: &S, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let sp = spectrum(s)?;
    Ok((seminorm_sq(&sp, 0.0) + seminorm_sq(&sp, alpha)).sqrt())
}

/// `||Z||_{H^{1/2-eps}} / ||G||_{H^{1/2+eps}}`; `None` when the denominator vanishes.
pub fn estimate_audit_fractional<S: Series + ?Sized, T: Series + ?Sized>(
    z: &S,
    g: &T,
    epsilon: f64,
) -> Result<Option<f64>> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    if z.len() != g.len() || (z.dt() - g.dt()).abs() > 1e-12 * g.dt() {
        return Err(Error::Mismatch("series come from different runs".into()));
    }
    let den = fractional_norm(g, 0.5 + epsilon)?;
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(fractional_norm(z, 0.5 - epsilon)? / den))
}

/// Series `Z^n = z^n - G^n` and `G^n` of a linear run.
pub fn linear_series(traj: &LinearEvolution) -> Result<(FieldSeries, FieldSeries)> {
    let dt = traj.params.dt;
    let big_z: Vec<VelocityField> = (0..traj.z.len()).map(|n| traj.homogeneous(n)).collect();
    let g: Vec<VelocityField> = traj.lifting.iter().map(|s| s.velocity.clone()).collect();
    Ok((FieldSeries::from_velocity(&big_z, dt)?, FieldSeries::from_velocity(&g, dt)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorRecord {
    /// `max_n ||e^n||^2`
    pub sup_l2_sq: f64,
    /// `sum_n dt ||D e^n||^2`
    pub deform_l2_sq: f64,
    /// `sum_n dt ||e^n.tau||_G^2 / delta`
    pub boundary_term: f64,
    pub total: f64,
    /// `(sum_n dt ||e^n.tau||_G^2)^{1/2}`
    pub trace_l2: f64,
}

/// Functionals of a field sequence sampled every `dt`; sums run over `n >= 1`.
pub fn field_functionals(fields: &[VelocityField], dt: f64, delta: f64) -> ErrorRecord {
    let mut r = ErrorRecord::default();
    let mut trace_sq = 0.0;
    for (n, e) in fields.iter().enumerate() {
        let nm = velocity_norms(e);
        r.sup_l2_sq = r.sup_l2_sq.max(nm.l2 * nm.l2);
        if n > 0 {
            r.deform_l2_sq += dt * deformation(e).norm_sq();
            trace_sq += dt * nm.boundary_l2_tangential.powi(2);
        }
    }
    r.boundary_term = trace_sq / delta;
    r.total = r.sup_l2_sq + r.deform_l2_sq + r.boundary_term;
    r.trace_l2 = trace_sq.sqrt();
    r
}

/// Functionals of `u - v` over the saved snapshots of two runs.
pub fn error_functionals(u: &Trajectory, v: &Trajectory, delta: f64) -> Result<ErrorRecord> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    if u.grid() != v.grid() || u.dt != v.dt || u.nt != v.nt || u.save_stride != v.save_stride {
        return Err(Error::Mismatch("trajectories differ in grid, dt, nt or save stride".into()));
    }
    if u.snapshots.len() != v.snapshots.len() {
        return Err(Error::Mismatch("trajectories hold different numbers of snapshots".into()));
    }
    let diff: Vec<VelocityField> = u
        .snapshots
        .iter()
        .zip(&v.snapshots)
        .map(|(a, b)| &a.velocity - &b.velocity)
        .collect();
    Ok(field_functionals(&diff, u.dt * u.save_stride as f64, delta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)` with equal weights.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let n = x.len();
    if n < 2 || n != y.len() || x.iter().chain(y).any(|v| !v.is_finite()) {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(SlopeFit { slope, intercept, r2 })
}

/// Slope of `log value` against `log delta`; `None` with fewer than 3 positive points.
pub fn fit_loglog(deltas: &[f64], values: &[f64]) -> Option<SlopeFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = deltas
        .iter()
        .zip(values)
        .filter(|(d, v)| **d > 0.0 && **v > 0.0 && v.is_finite())
        .map(|(d, v)| (d.ln(), v.ln()))
        .unzip();
    if x.len() < 3 {
        return None;
    }
    fit_line(&x, &y)
}

/// Gronwall curve for `||U||^2` with unit constant and left-endpoint sums.
///
/// `A_n = t_n + (1 + sup ||z||^2) sum_{m<n} dt ||grad z^m||^2` and
/// `bound_n = ||U^0||^2 e^{A_n} + sum_{m<n} dt (||f^m||^2 + ||grad z^m||^2 ||z^m||) e^{A_n - A_m}`.
pub fn gronwall_bound(ledger: &GronwallLedger) -> Vec<f64> {
    let e = &ledger.entries;
    if e.is_empty() {
        return Vec::new();
    }
    let dt = ledger.dt;
    let z_sup = e.iter().fold(0.0f64, |m, x| m.max(x.z_sq));
    let mut a = vec![0.0; e.len()];
    for n in 1..e.len() {
        a[n] = a[n - 1] + dt + (1.0 + z_sup) * dt * e[n - 1].grad_z_sq;
    }
    let mut out = Vec::with_capacity(e.len());
    // running sum of source terms discounted to t_0: sum dt s_m e^{-A_m}
    let mut acc = 0.0;
    for n in 0..e.len() {
        out.push(e[0].u_sq * a[n].exp() + acc * a[n].exp());
        let src = e[n].f_sq + e[n].grad_z_sq * e[n].z_sq.sqrt();
        acc += dt * src * (-a[n]).exp();
    }
    out
}

/// Steps where the running `sup ||U||^2` exceeds the curve.
pub fn gronwall_violations(ledger: &GronwallLedger, bound: &[f64]) -> usize {
    let mut sup: f64 = 0.0;
    let mut count = 0;
    for (e, b) in ledger.entries.iter().zip(bound) {
        sup = sup.max(e.u_sq);
        if sup > *b * (1.0 + 1e-12) {
            count += 1;
        }
    }
    count
}

/// Right-hand side of the `w = U - v` inequality with its three coefficients per level.
#[derive(Debug, Clone, PartialEq)]
pub struct LimestCurve {
    /// `(||Lap_h v|| + ||grad v||)^2`
    pub chi: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub bound: Vec<f64>,
    /// `sum_{m<nt} dt psi_m`
    pub psi_integral: f64,
}

/// Integrates `d/dt ||w||^2 <= delta chi + psi + phi ||w||^2` with unit constant.
pub fn limest_bound(ledger: &GronwallLedger, v_diag: &[StepDiagnostics], w0_sq: f64) -> Result<LimestCurve> {
    let e = &ledger.entries;
    if v_diag.len() != e.len() {
        return Err(Error::Mismatch(format!(
            "ledger has {} levels, no-slip diagnostics {}",
            e.len(),
            v_diag.len()
        )));
    }
    let dt = ledger.dt;
    let mut chi = Vec::with_capacity(e.len());
    let mut psi = Vec::with_capacity(e.len());
    let mut phi = Vec::with_capacity(e.len());
    for (x, v) in e.iter().zip(v_diag) {
        let gu = x.grad_u_sq.sqrt();
        let gz = x.grad_z_sq.sqrt();
        let (zu, zz) = (x.u_sq.sqrt(), x.z_sq.sqrt());
        let mix1 = gu.powf(2.0 / 3.0) * gz.powf(4.0 / 3.0);
        let mix2 = gu.powf(4.0 / 3.0) * gz.powf(2.0 / 3.0);
        chi.push((v.lap_norm + v.grad_sq.sqrt()).powi(2));
        psi.push(mix1 * zu + mix2 * zz + gz * gz * zz);
        phi.push(v.grad_sq + mix1 + mix2 + gz * gz);
    }
    let mut bound = Vec::with_capacity(e.len());
    let mut big_phi = 0.0;
    let mut acc = 0.0;
    for n in 0..e.len() {
        bound.push((w0_sq + acc) * f64::exp(big_phi));
        acc += dt * (ledger.delta * chi[n] + psi[n]) * (-big_phi - dt * phi[n]).exp();
        big_phi += dt * phi[n];
    }
    let psi_integral = psi[..psi.len().saturating_sub(1)].iter().sum::<f64>() * dt;
    Ok(LimestCurve {
        chi,
        psi,
        phi,
        bound,
        psi_integral,
    })
}

/// Everything recorded for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    /// functionals of `u_delta - v`
    pub uv: ErrorRecord,
    /// functionals of `w_delta = U - v`
    pub w: ErrorRecord,
    /// `sup ||z||^2 + sum dt ||D z||^2`
    pub z_functional: f64,
    /// `max_n ||grad G^n||`
    pub lifting_grad: f64,
    /// `||grad G||` for the unscaled flux (`alpha = 0`) at its peak level
    pub lifting_grad_unscaled: f64,
    pub psi_integral: f64,
    pub gronwall_violations: usize,
    pub limest_violations: usize,
    /// per-step diagnostics of `u_delta`
    pub diagnostics: Vec<StepDiagnostics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    NotApplicable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::NotApplicable => "N/A",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCheck {
    pub name: String,
    pub fit: Option<SlopeFit>,
    pub threshold: f64,
    /// `true` when the threshold bounds the slope from above.
    pub upper: bool,
    pub verdict: Verdict,
}

impl RateCheck {
    fn new(name: &str, fit: Option<SlopeFit>, threshold: f64, applicable: bool) -> Self {
        Self::bounded(name, fit, threshold, false, applicable)
    }

    fn bounded(name: &str, fit: Option<SlopeFit>, threshold: f64, upper: bool, applicable: bool) -> Self {
        let verdict = match fit {
            _ if !applicable => Verdict::NotApplicable,
            None => Verdict::Inconclusive,
            Some(f) if upper && f.slope <= threshold => Verdict::Pass,
            // a flat curve fits poorly but still satisfies an upper bound
            Some(f) if f.r2 < MIN_R2 => Verdict::Inconclusive,
            Some(f) if !upper && f.slope >= threshold => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        Self {
            name: name.into(),
            fit,
            threshold,
            upper,
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub alpha: f64,
    pub deltas: Vec<f64>,
    /// One entry per delta; `None` where the run failed.
    pub points: Vec<Option<SweepPoint>>,
    pub failures: Vec<(f64, String)>,
    /// per-step diagnostics of the no-slip run `v`
    pub baseline: Vec<StepDiagnostics>,
    /// false when the flux vanishes and every error sits at the discretization floor
    pub forced: bool,
}

impl RateReport {
    pub fn partial(&self) -> bool {
        !self.failures.is_empty()
    }

    fn series(&self, f: impl Fn(&SweepPoint) -> f64) -> (Vec<f64>, Vec<f64>) {
        self.deltas
            .iter()
            .zip(&self.points)
            .filter_map(|(d, p)| p.as_ref().map(|p| (*d, f(p))))
            .unzip()
    }

    pub fn fit(&self, f: impl Fn(&SweepPoint) -> f64) -> Option<SlopeFit> {
        let (d, v) = self.series(f);
        fit_loglog(&d, &v)
    }

    /// One-sided rate checks. At `alpha = 1` the `u - v` functionals are checked;
    /// otherwise the total for `w` is, and the `u - v` slope is only reported.
    pub fn checks(&self) -> Vec<RateCheck> {
        let on = self.forced;
        let mut out = Vec::new();
        if self.alpha == 1.0 {
            out.push(RateCheck::new("total", self.fit(|p| p.uv.total), 2.0 / 3.0 - 0.1, on));
            out.push(RateCheck::new(
                "sup_velocity",
                self.fit(|p| p.uv.sup_l2_sq.sqrt()),
                1.0 / 3.0 - 0.05,
                on,
            ));
            out.push(RateCheck::new("trace_l2", self.fit(|p| p.uv.trace_l2), 5.0 / 6.0 - 0.1, on));
            out.push(RateCheck::new("z_functional", self.fit(|p| p.z_functional), 1.0 - 0.1, on));
            out.push(RateCheck::new("psi_integral", self.fit(|p| p.psi_integral), 2.0 / 3.0 - 0.1, on));
        } else {
            out.push(RateCheck::new(
                "w_total",
                self.fit(|p| p.w.total),
                4.0 / 3.0 * (self.alpha - 0.5) - 0.2,
                on,
            ));
        }
        // slope against log(1/delta)
        let lift = self.fit(|p| p.lifting_grad_unscaled).map(|f| SlopeFit {
            slope: -f.slope,
            ..f
        });
        out.push(RateCheck::bounded("lifting_growth", lift, 0.5 + 0.05, true, on));
        out
    }

    pub fn gronwall_violations(&self) -> usize {
        self.points.iter().flatten().map(|p| p.gronwall_violations).sum()
    }

    pub fn passed(&self) -> bool {
        !self.partial()
            && self.gronwall_violations() == 0
            && self.checks().iter().all(|c| matches!(c.verdict, Verdict::Pass | Verdict::NotApplicable))
    }

    /// `delta,supL2sq,deformL2sq,boundary_term,total,trace_l2` for `u - v`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_records(path, |p| &p.uv)
    }

    /// Same columns for `w = U - v`.
    pub fn write_w_csv(&self, path: &Path) -> Result<()> {
        self.write_records(path, |p| &p.w)
    }

    fn write_records(&self, path: &Path, pick: impl Fn(&SweepPoint) -> &ErrorRecord) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["delta", "supL2sq", "deformL2sq", "boundary_term", "total", "trace_l2"])?;
        for p in self.points.iter().flatten() {
            let r = pick(p);
            w.write_record(
                [p.delta, r.sup_l2_sq, r.deform_l2_sq, r.boundary_term, r.total, r.trace_l2].map(|x| format!("{x:e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// Remaining per-delta quantities.
    pub fn write_detail_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record([
            "delta",
            "z_functional",
            "lifting_grad",
            "lifting_grad_unscaled",
            "psi_integral",
            "gronwall_violations",
            "limest_violations",
        ])?;
        for p in self.points.iter().flatten() {
            w.write_record([
                format!("{:e}", p.delta),
                format!("{:e}", p.z_functional),
                format!("{:e}", p.lifting_grad),
                format!("{:e}", p.lifting_grad_unscaled),
                format!("{:e}", p.psi_integral),
                p.gronwall_violations.to_string(),
                p.limest_violations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "deltas = {:?}", self.deltas);
        let _ = writeln!(s, "transform padding factor = {PADDING_FACTOR}");
        if self.partial() {
            let _ = writeln!(s, "PARTIAL: {} of {} runs failed", self.failures.len(), self.deltas.len());
            for (d, e) in &self.failures {
                let _ = writeln!(s, "  delta = {d}: {e}");
            }
        }
        let fmt_fit = |f: Option<SlopeFit>| match f {
            Some(f) => format!("slope {:.4} (R2 {:.4})", f.slope, f.r2),
            None => "no fit".to_string(),
        };
        let _ = writeln!(s, "u - v total: {}", fmt_fit(self.fit(|p| p.uv.total)));
        let _ = writeln!(s, "w total: {}", fmt_fit(self.fit(|p| p.w.total)));
        let _ = writeln!(s, "z functional: {}", fmt_fit(self.fit(|p| p.z_functional)));
        for c in self.checks() {
            let op = if c.upper { "<=" } else { ">=" };
            let _ = writeln!(s, "{} {}: {} {op} {:.4}", c.verdict, c.name, fmt_fit(c.fit), c.threshold);
        }
        let gv = self.gronwall_violations();
        let _ = writeln!(s, "{} gronwall: {} violations", if gv == 0 { "PASS" } else { "FAIL" }, gv);
        let lv: usize = self.points.iter().flatten().map(|p| p.limest_violations).sum();
        let _ = writeln!(s, "limest bound: {lv} violations");
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

/// Outcome of one split run against the no-slip baseline.
pub fn sweep_point(
    template: &NseConfig,
    u0: &VelocityField,
    w: &WallData,
    v: &Trajectory,
    delta: f64,
    alpha: f64,
) -> Result<SweepPoint> {
    let mut cfg = template.clone();
    cfg.delta = delta;
    cfg.alpha = alpha;
    cfg.save_stride = 1;
    let lin = solve_linear_evolution(
        w,
        &cfg.grid,
        LinearParams {
            delta,
            alpha,
            nu: cfg.nu,
            dt: cfg.dt,
            nt: cfg.nt,
            tol: cfg.tol,
        },
    )?;
    let mut z_functional: f64 = 0.0;
    let mut z_deform = 0.0;
    for (n, s) in lin.z.iter().take(cfg.nt + 1).enumerate() {
        z_functional = z_functional.max(velocity_norms(&s.velocity).l2.powi(2));
        if n > 0 {
            z_deform += cfg.dt * deformation(&s.velocity).norm_sq();
        }
    }
    z_functional += z_deform;
    let lifting_grad = lin
        .lifting
        .iter()
        .map(|s| velocity_norms(&s.velocity).h1_semi)
        .fold(0.0f64, f64::max);
    let peak = (0..=cfg.nt)
        .max_by(|&a, &b| {
            let m = |k: usize| w.g_bottom.row(k).iter().chain(w.g_top.row(k).iter()).fold(0.0f64, |m, x| m.max(x.abs()));
            m(a).total_cmp(&m(b))
        })
        .unwrap_or(0);
    let unscaled = StationaryStokes::new(&cfg.grid, delta, cfg.nu)?.solve(w, peak, 0.0, cfg.tol)?;
    let lifting_grad_unscaled = velocity_norms(&unscaled.velocity).h1_semi;
    let split = solve_split(&cfg, u0, &lin)?;
    drop(lin);
    let uv = error_functionals(&split.u, v, delta)?;
    let w_fields: Vec<VelocityField> = split
        .perturbation
        .snapshots
        .iter()
        .zip(&v.snapshots)
        .map(|(a, b)| &a.velocity - &b.velocity)
        .collect();
    let wrec = field_functionals(&w_fields, cfg.dt, delta);
    let gb = gronwall_bound(&split.ledger);
    let gronwall_violations = gronwall_violations(&split.ledger, &gb);
    let w_sq: Vec<f64> = w_fields.iter().map(|f| velocity_norms(f).l2.powi(2)).collect();
    let lim = limest_bound(&split.ledger, &v.diagnostics, w_sq[0])?;
    let limest_violations = w_sq
        .iter()
        .zip(&lim.bound)
        .filter(|(m, b)| **m > **b * (1.0 + 1e-12))
        .count();
    Ok(SweepPoint {
        delta,
        uv,
        w: wrec,
        z_functional,
        lifting_grad,
        lifting_grad_unscaled,
        psi_integral: lim.psi_integral,
        gronwall_violations,
        limest_violations,
        diagnostics: split.u.diagnostics,
    })
}

/// One no-slip run, then a linear evolution and split run per `delta`.
/// Per-delta failures are recorded and mark the report partial.
pub fn rate_sweep(
    template: &NseConfig,
    u0: &VelocityField,
    w: &WallData,
    deltas: &[f64],
    alpha: f64,
) -> Result<RateReport> {
    if deltas.len() < 4 {
        return Err(Error::InvalidInput(format!("a sweep needs at least 4 deltas, got {}", deltas.len())));
    }
    if deltas.windows(2).any(|p| p[1] >= p[0]) || deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
        return Err(Error::InvalidInput("deltas must be strictly decreasing values in (0, 1]".into()));
    }
    let mut base = template.clone();
    base.save_stride = 1;
    let v = solve_noslip(&base, u0)?;
    let mut points = Vec::with_capacity(deltas.len());
    let mut failures = Vec::new();
    for &d in deltas {
        match sweep_point(&base, u0, w, &v, d, alpha) {
            Ok(p) => points.push(Some(p)),
            Err(e) => {
                failures.push((d, e.to_string()));
                points.push(None);
            }
        }
    }
    Ok(RateReport {
        alpha,
        deltas: deltas.to_vec(),
        points,
        failures,
        baseline: v.diagnostics,
        forced: w.max_abs() > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nse::LedgerEntry;

    /// Direct O(n^2) transform of the zero-extended series.
    fn slow_seminorm_sq(values: &[f64], dt: f64, alpha: f64) -> f64 {
        let window = PADDING_FACTOR * values.len();
        let dxi = 2.0 * PI / (window as f64 * dt);
        let mut total = 0.0;
        for j in 0..window {
            let k = if j < window.div_ceil(2) { j as f64 } else { j as f64 - window as f64 };
            let xi = k * dxi;
            let (mut re, mut im) = (0.0, 0.0);
            for (n, f) in values.iter().enumerate() {
                let ph = -2.0 * PI * (j * n) as f64 / window as f64;
                re += f * ph.cos();
                im += f * ph.sin();
            }
            let p = dt * dt / (2.0 * PI) * (re * re + im * im);
            if xi != 0.0 {
                total += xi.abs().powf(2.0 * alpha) * p * dxi;
            }
        }
        total
    }

    fn tone(n: usize, t: f64, omega: f64) -> TimeSeries {
        let dt = t / (n - 1) as f64;
        TimeSeries::new((0..n).map(|k| (omega * k as f64 * dt).sin()).collect(), dt).unwrap()
    }

    #[test]
    fn zero_series_has_zero_norm() {
        let s = TimeSeries::new(vec![0.0; 16], 0.1).unwrap();
        assert_eq!(fractional_norm(&s, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn alpha_zero_is_parseval() {
        let s = tone(101, 1.0, 7.0);
        let l2 = (s.values.iter().map(|x| x * x).sum::<f64>() * s.dt).sqrt();
        let semi = fractional_seminorm(&s, 0.0).unwrap();
        assert!((semi - l2).abs() <= 1e-10 * l2);
        let full = fractional_norm(&s, 0.0).unwrap();
        assert!((full - 2f64.sqrt() * l2).abs() <= 1e-10 * l2);
    }

    #[test]
    fn matches_slow_transform() {
        let s = tone(97, 1.3, 2.0 * PI);
        for alpha in [0.1, 0.45, 0.6, 0.9] {
            let fast = fractional_seminorm(&s, alpha).unwrap().powi(2);
            let slow = slow_seminorm_sq(&s.values, s.dt, alpha);
            assert!((fast - slow).abs() <= 1e-8 * slow, "alpha {alpha}: {fast} vs {slow}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let s = tone(16, 1.0, 1.0);
        assert!(fractional_norm(&s, 1.0).is_err());
        assert!(fractional_norm(&s, -0.1).is_err());
        assert!(TimeSeries::new(vec![1.0; 7], 0.1).is_err());
    }

    #[test]
    fn seminorm_grows_with_alpha_at_unit_bandwidth() {
        // frequencies scaled so that every nonzero |xi| is at least 1
        let s = tone(64, 2.0 * PI, 3.0);
        assert!(fractional_seminorm(&s, 0.25).unwrap() <= fractional_seminorm(&s, 0.45).unwrap());
    }

    #[test]
    fn audit_flags_zero_denominator() {
        let z = TimeSeries::new(vec![0.0; 16], 0.1).unwrap();
        assert_eq!(estimate_audit_fractional(&z, &z, 0.1).unwrap(), None);
    }

    #[test]
    fn line_fit_recovers_exact_power() {
        let d = [0.4, 0.2, 0.1, 0.05];
        let v: Vec<f64> = d.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        let f = fit_loglog(&d, &v).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit_loglog(&d, &[1.0, 0.0, 0.0, 1.0]).is_none());
    }

    fn ledger(entries: Vec<LedgerEntry>) -> GronwallLedger {
        GronwallLedger {
            dt: 0.1,
            delta: 0.1,
            entries,
        }
    }

    fn entry(u_sq: f64) -> LedgerEntry {
        LedgerEntry {
            t: 0.0,
            u_sq,
            grad_u_sq: 0.0,
            dissipation_u: 0.0,
            z_sq: 0.0,
            grad_z_sq: 0.0,
            f_sq: 0.0,
        }
    }

    #[test]
    fn gronwall_with_zero_data_is_initial_energy_times_growth() {
        let l = ledger(vec![entry(0.0); 5]);
        assert!(gronwall_bound(&l).iter().all(|b| *b == 0.0));
        let l = ledger(vec![entry(2.0); 5]);
        let b = gronwall_bound(&l);
        for (n, x) in b.iter().enumerate() {
            assert!((x - 2.0 * (0.1 * n as f64).exp()).abs() < 1e-14);
        }
        assert_eq!(gronwall_violations(&l, &b), 0);
    }

    #[test]
    fn gronwall_matches_direct_double_sum() {
        let entries: Vec<LedgerEntry> = (0..6)
            .map(|n| LedgerEntry {
                t: 0.1 * n as f64,
                u_sq: 0.0,
                grad_u_sq: 0.0,
                dissipation_u: 0.0,
                z_sq: 0.1 + 0.02 * n as f64,
                grad_z_sq: 1.0 + 0.3 * n as f64,
                f_sq: 0.5,
            })
            .collect();
        let l = ledger(entries.clone());
        let b = gronwall_bound(&l);
        let zsup = 0.2;
        let a = |n: usize| {
            0.1 * n as f64 + (1.0 + zsup) * (0..n).map(|m| 0.1 * entries[m].grad_z_sq).sum::<f64>()
        };
        for n in 0..6 {
            let direct: f64 = (0..n)
                .map(|m| 0.1 * (0.5 + entries[m].grad_z_sq * entries[m].z_sq.sqrt()) * (a(n) - a(m)).exp())
                .sum();
            assert!((b[n] - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        use crate::grid::ChannelGrid;
        use crate::nse::{Mode, NseConfig};
        let g = ChannelGrid::new(8, 8, 1.0).unwrap();
        let mut cfg = NseConfig::new(g, 0.1, 1.0, 0.01, 4, Mode::NoSlip);
        cfg.forcing = Some(std::sync::Arc::new(|g: &ChannelGrid, _t: f64| {
            VelocityField::from_fn(g, |_, y| y * (1.0 - y), |_, _| 0.0)
        }));
        let v = solve_noslip(&cfg, &VelocityField::zeros(&g)).unwrap();
        let r = error_functionals(&v, &v, 0.1).unwrap();
        assert_eq!(r, ErrorRecord::default());
        assert!(v.diagnostics[4].energy > 0.0);
    }
}
