//! Adaptive integration of `ẍ = ∇U(t, x)` with a collision-approach halt.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MassMetric;
use crate::potentials::{PotentialSpec, Scaling};
use crate::trajectory::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated when absent.
    pub h0: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Halt once `U` exceeds `1/tol_collision`.
    pub tol_collision: f64,
    /// Halt once the distance to the collision set drops below this.
    pub r_floor: f64,
    /// Times the integrator must land on exactly.
    pub stop_times: Vec<f64>,
    /// Record only the stop times (plus start and end) instead of every step.
    pub record_stops_only: bool,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-300,
            h0: None,
            h_max: None,
            max_steps: 2_000_000,
            tol_collision: 1e-12,
            r_floor: 1e-10,
            stop_times: Vec::new(),
            record_stops_only: false,
        }
    }
}

impl IntegratorSettings {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    CollisionApproach,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationEvent {
    pub kind: EventKind,
    pub t: f64,
    pub index: usize,
    pub potential: f64,
    pub distance: f64,
}

/// Sampled solution of the classical system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSolution {
    pub metric: MassMetric,
    pub method: String,
    pub times: Vec<f64>,
    /// Signed time from each sample to the last one, summed from the step
    /// sizes so that it stays accurate when `t` itself cannot resolve it.
    pub remaining: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub events: Vec<IntegrationEvent>,
    pub accepted: usize,
    pub rejected: usize,
}

impl OdeSolution {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn halted_on_collision(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::CollisionApproach)
    }

    pub fn last(&self) -> (f64, &[f64], &[f64]) {
        let n = self.len() - 1;
        (self.times[n], &self.x[n], &self.v[n])
    }

    /// The samples as a [`Path`] carrying the integrator velocities.
    /// Samples whose times collapsed in floating point are dropped.
    pub fn to_path(&self) -> Result<Path> {
        let mut grid = Vec::with_capacity(self.len());
        let mut pts = Vec::with_capacity(self.len());
        let mut vel = Vec::with_capacity(self.len());
        for j in 0..self.len() {
            if grid.last().is_some_and(|t: &f64| self.times[j] <= *t) {
                continue;
            }
            grid.push(self.times[j]);
            pts.push(self.x[j].clone());
            vel.push(self.v[j].clone());
        }
        Path::new(self.metric.clone(), grid, pts)?.with_velocities(vel)
    }

    pub fn energy(&self, spec: &PotentialSpec) -> Vec<f64> {
        (0..self.len())
            .map(|j| 0.5 * self.metric.norm_sq(&self.v[j]) - spec.potential().value(self.times[j], &self.x[j]))
            .collect()
    }

    pub fn max_energy_drift(&self, spec: &PotentialSpec) -> f64 {
        let h = self.energy(spec);
        h.iter().map(|v| (v - h[0]).abs()).fold(0.0, f64::max)
    }

    /// `½Ï - 2h - (2-α̃)U + C₂` along the solution, with `Ï` from the
    /// equations of motion: `½Ï = |ẋ|² + x·∇U`. The kinetic terms cancel
    /// identically, leaving `x·∇U + α̃U + C₂`.
    pub fn lagrange_jacobi_margin(&self, spec: &PotentialSpec) -> Vec<f64> {
        let at = spec.alpha_tilde();
        let c2 = spec.constants.c2;
        let mut g = vec![0.0; self.metric.size()];
        (0..self.len())
            .map(|j| {
                let x = &self.x[j];
                spec.potential().partial_x(self.times[j], x, &mut g);
                let xg: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
                xg + at * spec.potential().value(self.times[j], x) + c2
            })
            .collect()
    }

    /// Total angular momentum `Σ m_i x_i ∧ v_i` for planar problems.
    pub fn angular_momentum(&self, j: usize) -> f64 {
        let d = self.metric.dim();
        assert_eq!(d, 2, "angular momentum is implemented for planar problems");
        self.metric
            .masses()
            .iter()
            .enumerate()
            .map(|(i, m)| m * (self.x[j][2 * i] * self.v[j][2 * i + 1] - self.x[j][2 * i + 1] * self.v[j][2 * i]))
            .sum()
    }
}

/// A strategy for integrating the classical system.
pub trait Integrator: Send + Sync {
    fn name(&self) -> &'static str;
    fn integrate(
        &self,
        spec: &PotentialSpec,
        x0: &[f64],
        v0: &[f64],
        span: (f64, f64),
        settings: &IntegratorSettings,
    ) -> Result<OdeSolution>;
}

pub type IntegratorHandle = Arc<dyn Integrator>;

pub struct IntegratorRegistry {
    entries: BTreeMap<String, IntegratorHandle>,
}

impl Default for IntegratorRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register(Arc::new(Dop853));
        r.register(Arc::new(Leapfrog { step: 1e-3 }));
        r
    }
}

impl IntegratorRegistry {
    pub fn register(&mut self, integrator: IntegratorHandle) {
        self.entries.insert(integrator.name().to_string(), integrator);
    }

    pub fn get(&self, name: &str) -> Result<IntegratorHandle> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName { registry: "integrator", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// DOP853 with default settings at relative tolerance `tol`.
pub fn integrate(spec: &PotentialSpec, x0: &[f64], v0: &[f64], span: (f64, f64), tol: f64) -> Result<OdeSolution> {
    Dop853.integrate(spec, x0, v0, span, &IntegratorSettings::default().with_rtol(tol))
}

/// Integrate and return samples exactly at `grid` (plus an early halt
/// sample when a collision approach stops the run).
pub fn integrate_to_grid(
    spec: &PotentialSpec,
    x0: &[f64],
    v0: &[f64],
    grid: &[f64],
    settings: &IntegratorSettings,
) -> Result<OdeSolution> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("grid needs at least two times".into()));
    }
    let s = IntegratorSettings { stop_times: grid.to_vec(), record_stops_only: true, ..settings.clone() };
    Dop853.integrate(spec, x0, v0, (grid[0], *grid.last().unwrap()), &s)
}

fn check_initial(spec: &PotentialSpec, x0: &[f64], v0: &[f64]) -> Result<()> {
    let n = spec.size();
    if x0.len() != n || v0.len() != n {
        return Err(Error::InvalidInput(format!("initial data must have length {n}")));
    }
    if spec.is_singular(x0) {
        return Err(Error::singular());
    }
    Ok(())
}

/// Shared bookkeeping of both integrators.
struct Recorder {
    sol: OdeSolution,
    steps: Vec<f64>,
    pending: f64,
    stops_only: bool,
}

impl Recorder {
    fn new(metric: &MassMetric, method: &str, t0: f64, x0: &[f64], v0: &[f64], stops_only: bool) -> Self {
        Self {
            sol: OdeSolution {
                metric: metric.clone(),
                method: method.to_string(),
                times: vec![t0],
                remaining: Vec::new(),
                x: vec![x0.to_vec()],
                v: vec![v0.to_vec()],
                events: Vec::new(),
                accepted: 0,
                rejected: 0,
            },
            steps: Vec::new(),
            pending: 0.0,
            stops_only,
        }
    }

    fn step(&mut self, h: f64, t: f64, x: &[f64], v: &[f64], at_stop: bool, force: bool) {
        self.pending += h;
        if !self.stops_only || at_stop || force {
            self.steps.push(self.pending);
            self.pending = 0.0;
            self.sol.times.push(t);
            self.sol.x.push(x.to_vec());
            self.sol.v.push(v.to_vec());
        }
    }

    fn finish(mut self) -> OdeSolution {
        let n = self.sol.times.len();
        let mut rem = vec![0.0; n];
        for j in (0..n - 1).rev() {
            rem[j] = rem[j + 1] + self.steps[j];
        }
        self.sol.remaining = rem;
        self.sol
    }
}

/// Halt test: `U > 1/tol_collision` or distance below `r_floor`.
fn collision_check(spec: &PotentialSpec, settings: &IntegratorSettings, t: f64, x: &[f64]) -> Option<(f64, f64)> {
    let d = spec.singular_distance(x);
    if spec.scaling() == Scaling::Free {
        return None;
    }
    let u = if d > 0.0 { spec.potential().value(t, x) } else { f64::INFINITY };
    (u > 1.0 / settings.tol_collision || d < settings.r_floor).then_some((u, d))
}

fn acceleration(spec: &PotentialSpec, t: f64, x: &[f64], out: &mut [f64]) {
    spec.potential().partial_x(t, x, out);
    spec.metric().raise(out);
}

fn next_stop(stops: &[f64], t: f64, dir: f64) -> Option<f64> {
    stops.iter().copied().filter(|s| (s - t) * dir > 0.0).min_by(|a, b| ((a - t) * dir).total_cmp(&((b - t) * dir)))
}

/// Fixed-step velocity Verlet, offered for long-time sanity checks.
#[derive(Debug, Clone, Copy)]
pub struct Leapfrog {
    pub step: f64,
}

impl Integrator for Leapfrog {
    fn name(&self) -> &'static str {
        "leapfrog"
    }

    fn integrate(
        &self,
        spec: &PotentialSpec,
        x0: &[f64],
        v0: &[f64],
        span: (f64, f64),
        settings: &IntegratorSettings,
    ) -> Result<OdeSolution> {
        check_initial(spec, x0, v0)?;
        let (t0, t1) = span;
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let n = x0.len();
        let mut rec = Recorder::new(spec.metric(), self.name(), t0, x0, v0, settings.record_stops_only);
        let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
        let mut a = vec![0.0; n];
        let mut t = t0;
        acceleration(spec, t, &x, &mut a);
        while (t1 - t) * dir > 0.0 {
            let mut h = self.step.abs() * dir;
            let mut at_stop = false;
            if let Some(s) = next_stop(&settings.stop_times, t, dir) {
                if (t + h - s) * dir >= 0.0 {
                    h = s - t;
                    at_stop = true;
                }
            }
            if (t + h - t1) * dir > 0.0 {
                h = t1 - t;
            }
            for k in 0..n {
                v[k] += 0.5 * h * a[k];
                x[k] += h * v[k];
            }
            let tn = t + h;
            acceleration(spec, tn, &x, &mut a);
            for k in 0..n {
                v[k] += 0.5 * h * a[k];
            }
            if x.iter().chain(&v).any(|c| !c.is_finite()) {
                return Err(Error::NonFiniteState { t: tn });
            }
            t = tn;
            rec.sol.accepted += 1;
            let done = (t1 - t) * dir <= 0.0;
            let hit = collision_check(spec, settings, t, &x);
            rec.step(h, t, &x, &v, at_stop || done, hit.is_some());
            if let Some((u, d)) = hit {
                let index = rec.sol.times.len() - 1;
                rec.sol.events.push(IntegrationEvent { kind: EventKind::CollisionApproach, t, index, potential: u, distance: d });
                break;
            }
            if rec.sol.accepted >= settings.max_steps {
                return Err(Error::MaxIterations(settings.max_steps));
            }
        }
        Ok(rec.finish())
    }
}

/// Dormand–Prince 8(5,3) with Hairer's step-size controller.
///
/// Error weights use the block norms of the configuration and velocity
/// parts; the configuration scale is capped by the distance to the
/// collision set so relative accuracy survives close approaches.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dop853;

mod tableau {
    pub const C: [f64; 12] = [
        0.0,
        0.526001519587677318785587544488E-01,
        0.789002279381515978178381316732E-01,
        0.118350341907227396726757197510E+00,
        0.281649658092772603273242802490E+00,
        0.333333333333333333333333333333E+00,
        0.25E+00,
        0.307692307692307692307692307692E+00,
        0.651282051282051282051282051282E+00,
        0.6E+00,
        0.857142857142857142857142857142E+00,
        1.0,
    ];

    pub const A: [&[f64]; 12] = [
        &[],
        &[5.26001519587677318785587544488E-2],
        &[1.97250569845378994544595329183E-2, 5.91751709536136983633785987549E-2],
        &[2.95875854768068491816892993775E-2, 0.0, 8.87627564304205475450678981324E-2],
        &[
            2.41365134159266685502369798665E-1,
            0.0,
            -8.84549479328286085344864962717E-1,
            9.24834003261792003115737966543E-1,
        ],
        &[3.7037037037037037037037037037E-2, 0.0, 0.0, 1.70828608729473871279604482173E-1, 1.25467687566822425016691814123E-1],
        &[
            3.7109375E-2,
            0.0,
            0.0,
            1.70252211019544039314978060272E-1,
            6.02165389804559606850219397283E-2,
            -1.7578125E-2,
        ],
        &[
            3.70920001185047927108779319836E-2,
            0.0,
            0.0,
            1.70383925712239993810214054705E-1,
            1.07262030446373284651809199168E-1,
            -1.53194377486244017527936158236E-2,
            8.27378916381402288758473766002E-3,
        ],
        &[
            6.24110958716075717114429577812E-1,
            0.0,
            0.0,
            -3.36089262944694129406857109825E0,
            -8.68219346841726006818189891453E-1,
            2.75920996994467083049415600797E1,
            2.01540675504778934086186788979E1,
            -4.34898841810699588477366255144E1,
        ],
        &[
            4.77662536438264365890433908527E-1,
            0.0,
            0.0,
            -2.48811461997166764192642586468E0,
            -5.90290826836842996371446475743E-1,
            2.12300514481811942347288949897E1,
            1.52792336328824235832596922938E1,
            -3.32882109689848629194453265587E1,
            -2.03312017085086261358222928593E-2,
        ],
        &[
            -9.3714243008598732571704021658E-1,
            0.0,
            0.0,
            5.18637242884406370830023853209E0,
            1.09143734899672957818500254654E0,
            -8.14978701074692612513997267357E0,
            -1.85200656599969598641566180701E1,
            2.27394870993505042818970056734E1,
            2.49360555267965238987089396762E0,
            -3.0467644718982195003823669022E0,
        ],
        &[
            2.27331014751653820792359768449E0,
            0.0,
            0.0,
            -1.05344954667372501984066689879E1,
            -2.00087205822486249909675718444E0,
            -1.79589318631187989172765950534E1,
            2.79488845294199600508499808837E1,
            -2.85899827713502369474065508674E0,
            -8.87285693353062954433549289258E0,
            1.23605671757943030647266201528E1,
            6.43392746015763530355970484046E-1,
        ],
    ];

    pub const B: [f64; 12] = [
        5.42937341165687622380535766363E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        4.45031289275240888144113950566E0,
        1.89151789931450038304281599044E0,
        -5.8012039600105847814672114227E0,
        3.1116436695781989440891606237E-1,
        -1.52160949662516078556178806805E-1,
        2.01365400804030348374776537501E-1,
        4.47106157277725905176885569043E-2,
    ];

    pub const BHH: [f64; 3] = [
        0.244094488188976377952755905512E+00,
        0.733846688281611857341361741547E+00,
        0.220588235294117647058823529412E-01,
    ];

    pub const E: [f64; 12] = [
        0.1312004499419488073250102996E-01,
        0.0,
        0.0,
        0.0,
        0.0,
        -0.1225156446376204440720569753E+01,
        -0.4957589496572501915214079952E+00,
        0.1664377182454986536961530415E+01,
        -0.3503288487499736816886487290E+00,
        0.3341791187130174790297318841E+00,
        0.8192320648511571246570742613E-01,
        -0.2235530786388629525884427845E-01,
    ];
}

struct Stepper<'a> {
    spec: &'a PotentialSpec,
    n: usize,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
}

impl Stepper<'_> {
    /// `f(t, y)` for `y = (x, v)`.
    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        out[..n].copy_from_slice(&y[n..]);
        acceleration(self.spec, t, &y[..n], &mut out[n..]);
    }

    /// One trial step; returns the new state and the scaled error norm.
    fn attempt(&mut self, t: f64, y: &[f64], h: f64, settings: &IntegratorSettings) -> (Vec<f64>, f64) {
        use tableau::*;
        let m = 2 * self.n;
        for s in 1..12 {
            for i in 0..m {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += a * self.k[j][i];
                    }
                }
                self.stage[i] = y[i] + h * acc;
            }
            let mut out = std::mem::take(&mut self.k[s]);
            self.rhs(t + C[s] * h, &self.stage, &mut out);
            self.k[s] = out;
        }
        let mut y_new = vec![0.0; m];
        let mut incr = vec![0.0; m];
        for i in 0..m {
            let mut acc = 0.0;
            for s in 0..12 {
                if B[s] != 0.0 {
                    acc += B[s] * self.k[s][i];
                }
            }
            incr[i] = acc;
            y_new[i] = y[i] + h * acc;
        }
        if y_new.iter().any(|v| !v.is_finite()) {
            return (y_new, f64::INFINITY);
        }
        let metric = self.spec.metric();
        let (x_old, v_old) = y.split_at(self.n);
        let (x_new, v_new) = y_new.split_at(self.n);
        let xs = metric
            .norm(x_old)
            .max(metric.norm(x_new))
            .min(self.spec.singular_distance(x_old).min(self.spec.singular_distance(x_new)));
        let vs = metric.norm(v_old).max(metric.norm(v_new));
        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..m {
            let sk = settings.atol + settings.rtol * if i < self.n { xs } else { vs };
            let w = metric.coord_mass(i % self.n).sqrt();
            let e3 = incr[i] - BHH[0] * self.k[0][i] - BHH[1] * self.k[8][i] - BHH[2] * self.k[11][i];
            let mut e5 = 0.0;
            for s in 0..12 {
                if E[s] != 0.0 {
                    e5 += E[s] * self.k[s][i];
                }
            }
            err2 += (w * e3 / sk).powi(2);
            err += (w * e5 / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let norm = h.abs() * err / (deno * m as f64).sqrt();
        (y_new, if norm.is_finite() { norm } else { f64::INFINITY })
    }
}

impl Integrator for Dop853 {
    fn name(&self) -> &'static str {
        "dop853"
    }

    fn integrate(
        &self,
        spec: &PotentialSpec,
        x0: &[f64],
        v0: &[f64],
        span: (f64, f64),
        settings: &IntegratorSettings,
    ) -> Result<OdeSolution> {
        check_initial(spec, x0, v0)?;
        let (t0, t1) = span;
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let n = x0.len();
        let mut st = Stepper { spec, n, k: vec![vec![0.0; 2 * n]; 12], stage: vec![0.0; 2 * n] };
        let mut y: Vec<f64> = x0.iter().chain(v0).copied().collect();
        let mut rec = Recorder::new(spec.metric(), self.name(), t0, x0, v0, settings.record_stops_only);
        let mut t = t0;
        let mut f0 = vec![0.0; 2 * n];
        st.rhs(t, &y, &mut f0);
        let h_max = settings.h_max.unwrap_or((t1 - t0).abs()).abs();
        let mut h = match settings.h0 {
            Some(h) => h.abs(),
            None => {
                let metric = spec.metric();
                let sx = metric.norm(x0).min(spec.singular_distance(x0)).max(1e-300);
                let fv = metric.norm(&f0[n..]).max(1e-300);
                let vn = metric.norm(v0);
                let scale = (sx / vn.max(1e-300)).min((sx / fv).sqrt());
                (1e-3 * scale).min(h_max).max(1e-12 * h_max)
            }
        } * dir;
        let mut fac_old: f64 = 1e-4;
        let mut reject_streak = 0usize;
        let mut last_rejected = false;
        while (t1 - t) * dir > 0.0 {
            if rec.sol.accepted + rec.sol.rejected >= settings.max_steps {
                return Err(Error::MaxIterations(settings.max_steps));
            }
            let mut at_stop = false;
            let mut h_try = h;
            if h_try.abs() > h_max {
                h_try = h_max * dir;
            }
            if let Some(s) = next_stop(&settings.stop_times, t, dir) {
                if (t + h_try - s) * dir >= 0.0 {
                    h_try = s - t;
                    at_stop = true;
                }
            }
            if (t + h_try - t1) * dir >= 0.0 {
                h_try = t1 - t;
                at_stop = true;
            }
            if h_try.abs() < 1e-300 {
                return Err(Error::StepUnderflow { t });
            }
            st.k[0].copy_from_slice(&f0);
            let (y_new, err) = st.attempt(t, &y, h_try, settings);
            if err <= 1.0 {
                reject_streak = 0;
                let t_new = if at_stop && (t + h_try - t1) * dir >= 0.0 {
                    t1
                } else if at_stop {
                    next_stop(&settings.stop_times, t, dir).unwrap_or(t + h_try)
                } else {
                    t + h_try
                };
                y = y_new;
                t = t_new;
                st.rhs(t, &y, &mut f0);
                if f0.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { t });
                }
                rec.sol.accepted += 1;
                let hit = collision_check(spec, settings, t, &y[..n]);
                let done = (t1 - t) * dir <= 0.0;
                rec.step(h_try, t, &y[..n], &y[n..], at_stop || done, hit.is_some());
                if let Some((u, d)) = hit {
                    let index = rec.sol.times.len() - 1;
                    rec.sol.events.push(IntegrationEvent {
                        kind: EventKind::CollisionApproach,
                        t,
                        index,
                        potential: u,
                        distance: d,
                    });
                    break;
                }
                let fac11 = err.max(1e-300).powf(0.125);
                let mut fac = (fac11 / 0.9).clamp(1.0 / 6.0, 3.0);
                if last_rejected {
                    fac = fac.max(1.0);
                }
                fac_old = err.max(1e-4);
                last_rejected = false;
                h = h_try / fac;
            } else {
                rec.sol.rejected += 1;
                reject_streak += 1;
                if reject_streak > 60 {
                    return Err(if err.is_finite() { Error::StepUnderflow { t } } else { Error::NonFiniteState { t } });
                }
                let fac11 = if err.is_finite() { err.powf(0.125) } else { 8.0 };
                h = h_try / (fac11 / 0.9).min(3.0).max(1.5);
                last_rejected = true;
            }
        }
        let _ = fac_old;
        Ok(rec.finish())
    }
}

/// Exact homothetic collision orbit `x(t) = [K(t* - t)]^{2/(2+α)} s̄` on
/// `grid` (all times before `t*`), with `K = ((2+α)/2)√(2Ũ(s̄))`.
pub fn homothetic_collision_orbit(spec: &PotentialSpec, s_bar: &[f64], t_star: f64, grid: &[f64]) -> Result<OdeSolution> {
    let Scaling::Homogeneous { alpha } = spec.scaling() else {
        return Err(Error::InvalidInput("homothetic orbits need a homogeneous potential".into()));
    };
    let metric = spec.metric();
    let norm = metric.norm(s_bar);
    if norm == 0.0 {
        return Err(Error::SingularDirection);
    }
    let s: Vec<f64> = s_bar.iter().map(|v| v / norm).collect();
    let b = spec.limit_potential(0.0, &s)?;
    let g = spec.limit_gradient(0.0, &s)?;
    let tan = crate::potentials::tangential(metric, &g, &s);
    let tn = metric.norm(&tan);
    if tn > 1e-8 * (1.0 + metric.norm(&g)) {
        return Err(Error::NotCentralConfiguration(tn));
    }
    if grid.iter().any(|t| *t >= t_star) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("grid must increase and stay before t*".into()));
    }
    let p = 2.0 / (2.0 + alpha);
    let k = (2.0 + alpha) / 2.0 * (2.0 * b).sqrt();
    let mut x = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for &t in grid {
        let tau = t_star - t;
        let r = (k * tau).powf(p);
        let rdot = -p * k * (k * tau).powf(p - 1.0);
        x.push(s.iter().map(|c| r * c).collect());
        v.push(s.iter().map(|c| rdot * c).collect());
    }
    let last = *grid.last().unwrap();
    Ok(OdeSolution {
        metric: metric.clone(),
        method: "homothetic".into(),
        times: grid.to_vec(),
        remaining: grid.iter().map(|t| last - t).collect(),
        x,
        v,
        events: Vec::new(),
        accepted: 0,
        rejected: 0,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::potentials::CentralPower;

    fn kepler() -> PotentialSpec {
        PotentialSpec::new(Arc::new(CentralPower::kepler_like(2, 1.0).unwrap()))
    }

    #[test]
    fn tableau_rows_are_consistent() {
        for s in 1..12 {
            let sum: f64 = tableau::A[s].iter().sum();
            assert!((sum - tableau::C[s]).abs() < 1e-12, "row {s}: {sum} vs {}", tableau::C[s]);
        }
        let b: f64 = tableau::B.iter().sum();
        assert!((b - 1.0).abs() < 1e-13);
    }

    #[test]
    fn circular_orbit_period() {
        let sol = integrate(&kepler(), &[1.0, 0.0], &[0.0, 1.0], (0.0, 2.0 * PI), 1e-12).unwrap();
        let (t, x, _) = sol.last();
        assert_eq!(t, 2.0 * PI);
        assert!((x[0] - 1.0).abs() < 1e-9 && x[1].abs() < 1e-9, "{x:?}");
        assert!(sol.max_energy_drift(&kepler()) < 1e-11);
    }

    #[test]
    fn radial_infall_halts_near_oracle_time() {
        let sol = integrate(&kepler(), &[1.0, 0.0], &[-(2f64.sqrt()), 0.0], (0.0, 1.0), 1e-12).unwrap();
        assert!(sol.halted_on_collision());
        let (t, x, _) = sol.last();
        // remaining flight time from r to the origin along ṙ = -√(2/r)
        let r = x[0];
        let rest = r.powf(1.5) * 2f64.sqrt() / 3.0;
        assert!((t + rest - 2f64.sqrt() / 3.0).abs() < 1e-9, "{}", t + rest);
    }

    #[test]
    fn stop_times_are_hit_exactly() {
        let grid: Vec<f64> = (0..=10).map(|j| j as f64 * 0.1).collect();
        let sol = integrate_to_grid(&kepler(), &[1.0, 0.0], &[0.0, 1.0], &grid, &IntegratorSettings::default()).unwrap();
        assert_eq!(sol.times, grid);
    }

    #[test]
    fn leapfrog_is_registered_and_conserves_energy() {
        let reg = IntegratorRegistry::default();
        assert_eq!(reg.names(), vec!["dop853", "leapfrog"]);
        let sol = reg
            .get("leapfrog")
            .unwrap()
            .integrate(&kepler(), &[1.0, 0.0], &[0.0, 1.0], (0.0, 10.0), &IntegratorSettings::default())
            .unwrap();
        assert!(sol.max_energy_drift(&kepler()) < 1e-6);
    }

    #[test]
    fn homothetic_orbit_constant() {
        let sol = homothetic_collision_orbit(&kepler(), &[1.0, 0.0], 1.0, &[0.0, 0.5]).unwrap();
        let k = 3.0 / 2f64.sqrt();
        assert!((sol.x[0][0] - k.powf(2.0 / 3.0)).abs() < 1e-14);
        assert!(sol.energy(&kepler()).iter().all(|h| h.abs() < 1e-13));
    }
}
