//! Discrete-time simulator of the 2-DoF direct-drive arm.
//!
//! The simulator stands in for a physical rig: coupled rigid-body dynamics
//! of two uniform-rod links on a horizontal plane (no gravity), an inner
//! per-joint position loop in the actuators, one lightly damped structural
//! vibration mode excited by joint accelerations, and two measurement
//! channels:
//!
//! - `y` (dim 7): joint angles, an IMU on the second link (gyro plus
//!   planar accelerometer at the mount point), and joint velocities —
//!   everything cheap enough to keep at runtime;
//! - `w` (dim 2): the tip position, emulating a motion-capture system that
//!   is only available while collecting identification data.
//!
//! The vibration mode deflects the tip and the IMU but not the joint
//! encoders, so `y` carries tip-relevant information that the joint
//! channels alone do not.
//!
//! All simulator parameters are surrogate choices: they are tuned so the
//! inner loop visibly lags a 60 mm/s tip reference and the vibration is
//! well above the tip noise floor, not to match any particular hardware.

use std::io::{self, BufRead, Write};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::csvnum;
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, ArmGeometry};

/// One second-order structural mode, excited by joint accelerations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrationParams {
    /// Natural frequency in Hz.
    pub freq_hz: f64,
    /// Damping ratio in (0, 1].
    pub zeta: f64,
    /// Gain from summed joint acceleration to modal forcing.
    pub gain: f64,
}

impl Default for VibrationParams {
    fn default() -> Self {
        VibrationParams {
            freq_hz: 12.0,
            zeta: 0.05,
            gain: 1.0,
        }
    }
}

/// Standard deviations of the additive Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseStd {
    /// Joint angle channels, rad.
    pub angle: f64,
    /// Gyro and joint velocity channels, rad/s.
    pub gyro: f64,
    /// Accelerometer channels, m/s^2.
    pub accel: f64,
    /// Tip position channels, m.
    pub tip: f64,
}

impl Default for NoiseStd {
    fn default() -> Self {
        NoiseStd {
            angle: 1e-4,
            gyro: 5e-3,
            accel: 5e-2,
            tip: 2e-4,
        }
    }
}

/// Physical and sampling parameters of the simulated arm.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    pub geometry: ArmGeometry,
    /// Link masses, kg (uniform rods).
    pub m1: f64,
    pub m2: f64,
    /// Viscous joint friction, N*m*s/rad.
    pub friction: f64,
    /// Inner position-loop gains of the actuators.
    pub kp: f64,
    pub kd: f64,
    /// Actuator torque saturation, N*m.
    pub torque_limit: f64,
    /// Structural vibration mode; `None` disables it.
    pub vibration: Option<VibrationParams>,
    pub noise: NoiseStd,
    /// Control period, s.
    pub control_period: f64,
    /// Integration sub-steps per control period.
    pub substeps: u32,
    /// IMU mount point distance from the elbow along link 2, m.
    pub imu_mount_radius: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            geometry: ArmGeometry::default(),
            m1: 0.06,
            m2: 0.04,
            friction: 0.005,
            kp: 1.2,
            kd: 0.05,
            torque_limit: 0.3,
            vibration: Some(VibrationParams::default()),
            noise: NoiseStd::default(),
            control_period: 0.02,
            substeps: 10,
            imu_mount_radius: 0.08,
        }
    }
}

impl PlantParams {
    /// Number of `y` channels produced by [`measure_y`].
    pub const N_Y: usize = 7;

    fn validate(&self) -> Result<()> {
        let positive = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("kp", self.kp),
            ("kd", self.kd),
            ("control_period", self.control_period),
            ("imu_mount_radius", self.imu_mount_radius),
            ("l1", self.geometry.l1),
            ("l2", self.geometry.l2),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.friction < 0.0 || self.torque_limit < 0.0 {
            return Err(Error::InvalidArgument(
                "friction and torque_limit must be nonnegative".into(),
            ));
        }
        if self.substeps < 1 {
            return Err(Error::InvalidArgument("substeps must be >= 1".into()));
        }
        if let Some(v) = &self.vibration {
            if !(v.freq_hz > 0.0) || !(v.zeta > 0.0 && v.zeta <= 1.0) {
                return Err(Error::InvalidArgument(
                    "vibration needs freq_hz > 0 and zeta in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    // Uniform-rod inertia about the center of mass.
    fn rod_inertias(&self) -> (f64, f64) {
        let l1 = self.geometry.l1;
        let l2 = self.geometry.l2;
        (self.m1 * l1 * l1 / 12.0, self.m2 * l2 * l2 / 12.0)
    }
}

/// Full simulator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Joint angles (alpha, beta), rad.
    pub q: [f64; 2],
    /// Joint velocities, rad/s.
    pub qdot: [f64; 2],
    /// Vibration mode displacement (rad, as an angular deflection of
    /// link 2) and velocity.
    pub vib_pos: f64,
    pub vib_vel: f64,
    /// Reference applied on the previous step.
    pub last_u: [f64; 2],
}

impl PlantState {
    /// State at rest at the given joint angles.
    pub fn at_rest(q: [f64; 2]) -> Self {
        PlantState {
            q,
            qdot: [0.0, 0.0],
            vib_pos: 0.0,
            vib_vel: 0.0,
            last_u: q,
        }
    }
}

fn joint_accel(params: &PlantParams, q: [f64; 2], qdot: [f64; 2], tau: [f64; 2]) -> [f64; 2] {
    let l1 = params.geometry.l1;
    let lc1 = l1 / 2.0;
    let lc2 = params.geometry.l2 / 2.0;
    let (i1, i2) = params.rod_inertias();
    let (m1, m2) = (params.m1, params.m2);
    let c2 = q[1].cos();
    let s2 = q[1].sin();
    let b = m2 * l1 * lc2;
    let m22 = m2 * lc2 * lc2 + i2;
    let m11 = m1 * lc1 * lc1 + i1 + m2 * (l1 * l1 + lc2 * lc2) + i2 + 2.0 * b * c2;
    let m12 = m22 + b * c2;
    // Coriolis/centrifugal vector for the standard planar 2-link chain.
    let c1 = -b * s2 * (2.0 * qdot[0] * qdot[1] + qdot[1] * qdot[1]);
    let c2v = b * s2 * qdot[0] * qdot[0];
    let rhs1 = tau[0] - c1 - params.friction * qdot[0];
    let rhs2 = tau[1] - c2v - params.friction * qdot[1];
    let det = m11 * m22 - m12 * m12;
    [
        (m22 * rhs1 - m12 * rhs2) / det,
        (m11 * rhs2 - m12 * rhs1) / det,
    ]
}

fn pd_torque(params: &PlantParams, q: [f64; 2], qdot: [f64; 2], u: [f64; 2]) -> [f64; 2] {
    let lim = params.torque_limit;
    [
        (params.kp * (u[0] - q[0]) - params.kd * qdot[0]).clamp(-lim, lim),
        (params.kp * (u[1] - q[1]) - params.kd * qdot[1]).clamp(-lim, lim),
    ]
}

/// Advances the plant one control period under reference `u`, using
/// fixed-sub-step semi-implicit integration. Deterministic.
pub fn plant_step(params: &PlantParams, state: &PlantState, u: [f64; 2]) -> Result<PlantState> {
    if !(u[0].is_finite() && u[1].is_finite()) {
        return Err(Error::InvalidArgument("non-finite input".into()));
    }
    params.validate()?;
    let h = params.control_period / params.substeps as f64;
    let mut s = *state;
    for _ in 0..params.substeps {
        let tau = pd_torque(params, s.q, s.qdot, u);
        let qdd = joint_accel(params, s.q, s.qdot, tau);
        if let Some(v) = &params.vibration {
            let omega = std::f64::consts::TAU * v.freq_hz;
            let drive = qdd[0] + qdd[1];
            let vib_acc =
                -omega * omega * s.vib_pos - 2.0 * v.zeta * omega * s.vib_vel + v.gain * drive;
            s.vib_vel += h * vib_acc;
            s.vib_pos += h * s.vib_vel;
        }
        s.qdot[0] += h * qdd[0];
        s.qdot[1] += h * qdd[1];
        s.q[0] += h * s.qdot[0];
        s.q[1] += h * s.qdot[1];
    }
    s.last_u = u;
    Ok(s)
}

/// Kinetic energy of the rigid links (excludes the vibration mode).
pub fn kinetic_energy(params: &PlantParams, state: &PlantState) -> f64 {
    let l1 = params.geometry.l1;
    let lc1 = l1 / 2.0;
    let lc2 = params.geometry.l2 / 2.0;
    let (i1, i2) = params.rod_inertias();
    let (m1, m2) = (params.m1, params.m2);
    let c2 = state.q[1].cos();
    let b = m2 * l1 * lc2;
    let m22 = m2 * lc2 * lc2 + i2;
    let m11 = m1 * lc1 * lc1 + i1 + m2 * (l1 * l1 + lc2 * lc2) + i2 + 2.0 * b * c2;
    let m12 = m22 + b * c2;
    let [w1, w2] = state.qdot;
    0.5 * (m11 * w1 * w1 + 2.0 * m12 * w1 * w2 + m22 * w2 * w2)
}

fn gauss(rng: &mut ChaCha12Rng, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    std * z
}

/// Measures the cheap sensor vector
/// `y = [alpha, beta, gyro, accel_x, accel_y, qdot1, qdot2]`.
///
/// The gyro and the planar accelerometer live at the IMU mount point on
/// link 2 and include the vibration mode; accelerations are formed by
/// finite-differencing velocities between `state` and `prev` over one
/// control period. Accelerometer axes are the link-2 frame (x along the
/// link). Angle noise applies to the angle channels, gyro noise to the
/// three angular-rate channels, accelerometer noise to the two linear
/// channels.
pub fn measure_y(
    params: &PlantParams,
    state: &PlantState,
    prev: &PlantState,
    rng: &mut ChaCha12Rng,
) -> Vec<f64> {
    let dt = params.control_period;
    let qdd = [
        (state.qdot[0] - prev.qdot[0]) / dt,
        (state.qdot[1] - prev.qdot[1]) / dt,
    ];
    let (vib_vel, vib_acc) = if params.vibration.is_some() {
        (state.vib_vel, (state.vib_vel - prev.vib_vel) / dt)
    } else {
        (0.0, 0.0)
    };
    let alpha = state.q[0];
    let theta = state.q[0] + state.q[1];
    let alpha_dot = state.qdot[0];
    let theta_dot = state.qdot[0] + state.qdot[1] + vib_vel;
    let theta_dd = qdd[0] + qdd[1] + vib_acc;
    let l1 = params.geometry.l1;
    let rm = params.imu_mount_radius;
    // World-frame acceleration of the mount point: elbow motion plus
    // rotation of link 2 about the elbow.
    let ax_world = l1 * (-qdd[0] * alpha.sin() - alpha_dot * alpha_dot * alpha.cos())
        + rm * (-theta_dd * theta.sin() - theta_dot * theta_dot * theta.cos());
    let ay_world = l1 * (qdd[0] * alpha.cos() - alpha_dot * alpha_dot * alpha.sin())
        + rm * (theta_dd * theta.cos() - theta_dot * theta_dot * theta.sin());
    // Rotate into the link-2 body frame.
    let accel_x = ax_world * theta.cos() + ay_world * theta.sin();
    let accel_y = -ax_world * theta.sin() + ay_world * theta.cos();
    let n = &params.noise;
    vec![
        state.q[0] + gauss(rng, n.angle),
        state.q[1] + gauss(rng, n.angle),
        theta_dot + gauss(rng, n.gyro),
        accel_x + gauss(rng, n.accel),
        accel_y + gauss(rng, n.accel),
        state.qdot[0] + gauss(rng, n.gyro),
        state.qdot[1] + gauss(rng, n.gyro),
    ]
}

/// Measures the tip position `w`: forward kinematics of the joint angles
/// plus the vibration deflection projected at the tip, plus Gaussian noise
/// emulating a motion-capture system.
pub fn measure_w(params: &PlantParams, state: &PlantState, rng: &mut ChaCha12Rng) -> [f64; 2] {
    let (mut x, mut y) = forward_kinematics(&params.geometry, state.q[0], state.q[1]);
    if params.vibration.is_some() {
        let theta = state.q[0] + state.q[1];
        let deflection = state.vib_pos * params.geometry.l2;
        x += deflection * (-theta.sin());
        y += deflection * theta.cos();
    }
    [
        x + gauss(rng, params.noise.tip),
        y + gauss(rng, params.noise.tip),
    ]
}

/// Synchronized time series `(u_t, y_t, w_t)`: the raw identification
/// dataset. Row `t` holds the reference applied over period `t` and the
/// measurements taken at the end of that period. Dimensions are free so
/// logs of other systems can reuse the same machinery.
#[derive(Debug, Clone, PartialEq)]
pub struct IoLog {
    /// Sample period, s.
    pub period: f64,
    /// `(n_samples, n_u)` inputs.
    pub u: Array2<f64>,
    /// `(n_samples, n_y)` cheap measurements.
    pub y: Array2<f64>,
    /// `(n_samples, n_w)` target measurements.
    pub w: Array2<f64>,
}

impl IoLog {
    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_u(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_w(&self) -> usize {
        self.w.ncols()
    }

    /// Keeps only the given `y` columns (used for sensor ablations).
    pub fn select_y_channels(&self, channels: &[usize]) -> Result<IoLog> {
        for &c in channels {
            if c >= self.n_y() {
                return Err(Error::InvalidArgument(format!(
                    "y channel {c} out of range (log has {})",
                    self.n_y()
                )));
            }
        }
        Ok(IoLog {
            period: self.period,
            u: self.u.clone(),
            y: self.y.select(ndarray::Axis(1), channels),
            w: self.w.clone(),
        })
    }

    /// Contiguous time slice `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> IoLog {
        IoLog {
            period: self.period,
            u: self.u.slice(ndarray::s![start..end, ..]).to_owned(),
            y: self.y.slice(ndarray::s![start..end, ..]).to_owned(),
            w: self.w.slice(ndarray::s![start..end, ..]).to_owned(),
        }
    }

    /// Writes `t,u1..,y1..,w1..` rows with 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.n_u() {
            header.push_str(&format!(",u{i}"));
        }
        for i in 1..=self.n_y() {
            header.push_str(&format!(",y{i}"));
        }
        for i in 1..=self.n_w() {
            header.push_str(&format!(",w{i}"));
        }
        writeln!(out, "{header}")?;
        for t in 0..self.len() {
            let mut row = csvnum::fmt(t as f64 * self.period);
            for v in self.u.row(t) {
                row.push(',');
                row.push_str(&csvnum::fmt(*v));
            }
            for v in self.y.row(t) {
                row.push(',');
                row.push_str(&csvnum::fmt(*v));
            }
            for v in self.w.row(t) {
                row.push(',');
                row.push_str(&csvnum::fmt(*v));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    /// Reads a log written by [`IoLog::write_csv`], skipping `#` comment
    /// lines. Column counts are recovered from the header; the period from
    /// the time column.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<IoLog> {
        let mut n_u = 0;
        let mut n_y = 0;
        let mut n_w = 0;
        let mut header_seen = false;
        let mut times: Vec<f64> = Vec::new();
        let mut u = Vec::new();
        let mut y = Vec::new();
        let mut w = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.first() != Some(&"t") {
                    return Err(Error::InvalidArgument(format!(
                        "log header must start with `t`, got `{line}`"
                    )));
                }
                n_u = cols.iter().filter(|c| c.starts_with('u')).count();
                n_y = cols.iter().filter(|c| c.starts_with('y')).count();
                n_w = cols.iter().filter(|c| c.starts_with('w')).count();
                if n_u == 0 || n_y == 0 || n_w == 0 || cols.len() != 1 + n_u + n_y + n_w {
                    return Err(Error::InvalidArgument(format!(
                        "unrecognized log header `{line}`"
                    )));
                }
                header_seen = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|c| {
                    c.parse::<f64>().map_err(|_| {
                        Error::InvalidArgument(format!(
                            "line {}: `{c}` is not a number",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            if vals.len() != 1 + n_u + n_y + n_w {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected {} columns, got {}",
                    lineno + 1,
                    1 + n_u + n_y + n_w,
                    vals.len()
                )));
            }
            times.push(vals[0]);
            u.extend_from_slice(&vals[1..1 + n_u]);
            y.extend_from_slice(&vals[1 + n_u..1 + n_u + n_y]);
            w.extend_from_slice(&vals[1 + n_u + n_y..]);
        }
        if !header_seen {
            return Err(Error::InvalidArgument("log file has no header".into()));
        }
        let n = times.len();
        let period = if n >= 2 { times[1] - times[0] } else { 0.0 };
        Ok(IoLog {
            period,
            u: Array2::from_shape_vec((n, n_u), u).expect("row count consistent"),
            y: Array2::from_shape_vec((n, n_y), y).expect("row count consistent"),
            w: Array2::from_shape_vec((n, n_w), w).expect("row count consistent"),
        })
    }
}

/// Rolls the plant over an input sequence, producing the aligned
/// identification log. The same seed gives a bit-identical log.
pub fn simulate_log(
    params: &PlantParams,
    inputs: &[[f64; 2]],
    initial: &PlantState,
    seed: u64,
) -> Result<IoLog> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("input sequence is empty".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = inputs.len();
    let mut u_rows = Vec::with_capacity(n * 2);
    let mut y_rows = Vec::with_capacity(n * PlantParams::N_Y);
    let mut w_rows = Vec::with_capacity(n * 2);
    let mut state = *initial;
    for &u in inputs {
        let prev = state;
        state = plant_step(params, &state, u)?;
        let y = measure_y(params, &state, &prev, &mut rng);
        let w = measure_w(params, &state, &mut rng);
        u_rows.extend_from_slice(&u);
        y_rows.extend_from_slice(&y);
        w_rows.extend_from_slice(&w);
    }
    Ok(IoLog {
        period: params.control_period,
        u: Array2::from_shape_vec((n, 2), u_rows).expect("shape"),
        y: Array2::from_shape_vec((n, PlantParams::N_Y), y_rows).expect("shape"),
        w: Array2::from_shape_vec((n, 2), w_rows).expect("shape"),
    })
}
