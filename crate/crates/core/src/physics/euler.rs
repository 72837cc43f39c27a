//! Compressible Euler equations: pressure-ratio minmod reconstruction, a
//! spectral-radius interface flux and midpoint RK2, on a periodic grid.

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{PhysicsError, Scheme};
use crate::field::FieldState;
use crate::geometry::{Region, StencilShape};

pub type Conserved = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerParams {
    pub gamma: f64,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub cfl: f64,
}

impl EulerParams {
    pub fn check(&self) -> Result<(), PhysicsError> {
        if !(self.gamma > 1.0) {
            return Err(PhysicsError::InvalidParams(format!("gamma = {} must exceed 1", self.gamma)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(PhysicsError::InvalidParams(format!("cfl = {} outside (0, 1]", self.cfl)));
        }
        if !(self.dx > 0.0 && self.dy > 0.0 && self.dt > 0.0) {
            return Err(PhysicsError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }
}

#[inline]
pub fn pressure(q: &Conserved, gamma: f64) -> Result<f64, PhysicsError> {
    let rho = q[0];
    if !(rho > 0.0) {
        return Err(PhysicsError::NonPhysicalState { rho, p: f64::NAN });
    }
    let p = (gamma - 1.0) * (q[3] - 0.5 * (q[1] * q[1] + q[2] * q[2]) / rho);
    if !(p > 0.0) {
        return Err(PhysicsError::NonPhysicalState { rho, p });
    }
    Ok(p)
}

/// `|u_n| + sqrt(gamma p / rho)` for a state with known pressure.
#[inline]
pub fn spectral_radius(q: &Conserved, p: f64, axis: Axis, gamma: f64) -> f64 {
    let un = match axis {
        Axis::X => q[1] / q[0],
        Axis::Y => q[2] / q[0],
    };
    un.abs() + (gamma * p / q[0]).sqrt()
}

#[inline]
pub fn physical_flux(q: &Conserved, p: f64, axis: Axis) -> Conserved {
    let u = q[1] / q[0];
    let v = q[2] / q[0];
    match axis {
        Axis::X => [q[1], q[1] * u + p, q[1] * v, (q[3] + p) * u],
        Axis::Y => [q[2], q[1] * v, q[2] * v + p, (q[3] + p) * v],
    }
}

#[inline]
fn limited(base: &Conserved, toward: &Conserved, ratio: f64) -> Conserved {
    if ratio.is_finite() && ratio > 0.0 {
        let phi = ratio.min(1.0) / 2.0;
        [
            base[0] + phi * (toward[0] - base[0]),
            base[1] + phi * (toward[1] - base[1]),
            base[2] + phi * (toward[2] - base[2]),
            base[3] + phi * (toward[3] - base[3]),
        ]
    } else {
        *base
    }
}

/// Left and right states at the interface between cells `i` and `i+1`, from
/// cells `i-1, i, i+1, i+2` and their pressures.
#[inline]
pub fn minmod_reconstruct(q: [&Conserved; 4], p: [f64; 4]) -> (Conserved, Conserved) {
    let ratio_left = (p[2] - p[1]) / (p[1] - p[0]);
    let ratio_right = (p[2] - p[1]) / (p[3] - p[2]);
    (
        limited(q[1], q[2], ratio_left),
        limited(q[2], q[1], ratio_right),
    )
}

/// Physical flux and spectral radius of one state, sharing one division.
#[inline]
fn flux_and_radius(q: &Conserved, axis: Axis, gamma: f64) -> Result<(Conserved, f64), PhysicsError> {
    let rho = q[0];
    if !(rho > 0.0) {
        return Err(PhysicsError::NonPhysicalState { rho, p: f64::NAN });
    }
    let inv = 1.0 / rho;
    let u = q[1] * inv;
    let v = q[2] * inv;
    let p = (gamma - 1.0) * (q[3] - 0.5 * (q[1] * u + q[2] * v));
    if !(p > 0.0) {
        return Err(PhysicsError::NonPhysicalState { rho, p });
    }
    let c = (gamma * p * inv).sqrt();
    Ok(match axis {
        Axis::X => ([q[1], q[1] * u + p, q[1] * v, (q[3] + p) * u], u.abs() + c),
        Axis::Y => ([q[2], q[1] * v, q[2] * v + p, (q[3] + p) * v], v.abs() + c),
    })
}

#[inline]
pub fn interface_flux(
    ql: &Conserved,
    qr: &Conserved,
    axis: Axis,
    gamma: f64,
) -> Result<Conserved, PhysicsError> {
    let (fl, rl) = flux_and_radius(ql, axis, gamma)?;
    let (fr, rr) = flux_and_radius(qr, axis, gamma)?;
    let r = rl.max(rr);
    Ok([
        0.5 * (fl[0] + fr[0] + r * (ql[0] - qr[0])),
        0.5 * (fl[1] + fr[1] + r * (ql[1] - qr[1])),
        0.5 * (fl[2] + fr[2] + r * (ql[2] - qr[2])),
        0.5 * (fl[3] + fr[3] + r * (ql[3] - qr[3])),
    ])
}

#[inline]
fn limiter(ratio: f64) -> f64 {
    // Written without short-circuits so the face loop vectorizes.
    let usable = (ratio > 0.0) & (ratio < f64::INFINITY);
    let capped = if ratio < 1.0 { ratio } else { 1.0 };
    if usable {
        capped / 2.0
    } else {
        0.0
    }
}

/// Footprint and face fluxes as struct-of-arrays, reused across calls.
#[derive(Default)]
struct Scratch {
    q: [Vec<f64>; 4],
    p: Vec<f64>,
    xs: Vec<usize>,
    fx: [Vec<f64>; 4],
    gy: [Vec<f64>; 4],
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

const REACH: usize = 2;

/// Fluxes through `len` consecutive faces along axis `N` (1 for x, 2 for y).
/// Face `t` reads footprint cells `o[k] + t`, k = 0..4, in stencil order.
/// Returns false if a reconstructed state is not physical.
#[inline(always)]
fn face_run<const N: usize>(
    q: &[Vec<f64>; 4],
    p: &[f64],
    o: [usize; 4],
    gamma: f64,
    out: [&mut [f64]; 4],
) -> bool {
    let len = out[0].len();
    let pk = |k: usize| &p[o[k]..o[k] + len];
    let qk = |v: usize, k: usize| &q[v][o[k]..o[k] + len];
    let (p0, p1, p2, p3) = (pk(0), pk(1), pk(2), pk(3));
    let (a0, a1) = (qk(0, 1), qk(0, 2));
    let (b0, b1) = (qk(1, 1), qk(1, 2));
    let (c0, c1) = (qk(2, 1), qk(2, 2));
    let (d0, d1) = (qk(3, 1), qk(3, 2));
    let [f0, f1, f2, f3] = out;
    let g1 = gamma - 1.0;
    let mut bad = false;
    for t in 0..len {
        let rise = p2[t] - p1[t];
        let pl = limiter(rise / (p1[t] - p0[t]));
        let pr = limiter(rise / (p3[t] - p2[t]));
        let l = [
            a0[t] + pl * (a1[t] - a0[t]),
            b0[t] + pl * (b1[t] - b0[t]),
            c0[t] + pl * (c1[t] - c0[t]),
            d0[t] + pl * (d1[t] - d0[t]),
        ];
        let r = [
            a1[t] + pr * (a0[t] - a1[t]),
            b1[t] + pr * (b0[t] - b1[t]),
            c1[t] + pr * (c0[t] - c1[t]),
            d1[t] + pr * (d0[t] - d1[t]),
        ];
        let mut flux = [[0.0; 4]; 2];
        let mut radius = [0.0; 2];
        for (s, st) in [l, r].iter().enumerate() {
            let inv = 1.0 / st[0];
            let u = st[1] * inv;
            let v = st[2] * inv;
            let pres = g1 * (st[3] - 0.5 * (st[1] * u + st[2] * v));
            bad |= !(st[0] > 0.0) | !(pres > 0.0);
            let c = (gamma * pres * inv).sqrt();
            let un = if N == 1 { u } else { v };
            flux[s] = [
                st[N],
                if N == 1 { st[1] * u + pres } else { st[1] * v },
                if N == 1 { st[1] * v } else { st[2] * v + pres },
                (st[3] + pres) * un,
            ];
            radius[s] = un.abs() + c;
        }
        let rad = radius[0].max(radius[1]);
        f0[t] = 0.5 * (flux[0][0] + flux[1][0] + rad * (l[0] - r[0]));
        f1[t] = 0.5 * (flux[0][1] + flux[1][1] + rad * (l[1] - r[1]));
        f2[t] = 0.5 * (flux[0][2] + flux[1][2] + rad * (l[2] - r[2]));
        f3[t] = 0.5 * (flux[0][3] + flux[1][3] + rad * (l[3] - r[3]));
    }
    !bad
}

/// First failing face of a run, through the scalar path.
fn face_error(q: &[Vec<f64>; 4], p: &[f64], o: [usize; 4], len: usize, axis: Axis, gamma: f64) -> PhysicsError {
    for t in 0..len {
        let cell = |k: usize| [q[0][o[k] + t], q[1][o[k] + t], q[2][o[k] + t], q[3][o[k] + t]];
        let cells = [cell(0), cell(1), cell(2), cell(3)];
        let (ql, qr) = minmod_reconstruct(
            [&cells[0], &cells[1], &cells[2], &cells[3]],
            [p[o[0] + t], p[o[1] + t], p[o[2] + t], p[o[3] + t]],
        );
        if let Err(e) = interface_flux(&ql, &qr, axis, gamma) {
            return e;
        }
    }
    PhysicsError::NonPhysicalState { rho: f64::NAN, p: f64::NAN }
}

fn substep_into(
    prev: &FieldState,
    base: &FieldState,
    region: &Region,
    stage: usize,
    params: &EulerParams,
    out: &mut [f64],
) -> Result<(), PhysicsError> {
    let gamma = params.gamma;
    let (w, h) = (region.width(), region.height());
    let bw = w + 2 * REACH;
    let bh = h + 2 * REACH;
    let (nx, ny) = (prev.nx as i64, prev.ny as i64);

    SCRATCH.with(|scratch| {
        let scratch = &mut *scratch.borrow_mut();
        let Scratch { q, p, xs, fx, gy } = scratch;
        // Footprint cross of the region, with pressures. Corners are never read.
        for plane in q.iter_mut() {
            plane.resize(bw * bh, 0.0);
        }
        p.resize(bw * bh, 0.0);
        xs.clear();
        xs.extend((0..bw).map(|i| (region.x0 as i64 + i as i64 - REACH as i64).rem_euclid(nx) as usize));
        let stride = prev.nx * prev.ny;
        let data = &prev.data;
        for j in 0..bh {
            let y = (region.y0 as i64 + j as i64 - REACH as i64).rem_euclid(ny) as usize;
            let row = y * prev.nx;
            let full_row = j >= REACH && j < REACH + h;
            let (c0, c1) = if full_row { (0, bw) } else { (REACH, REACH + w) };
            let at = j * bw;
            for i in c0..c1 {
                let src = row + xs[i];
                for (v, plane) in q.iter_mut().enumerate() {
                    plane[at + i] = data[v * stride + src];
                }
            }
            let mut bad = false;
            for i in c0..c1 {
                let k = at + i;
                let (rho, mx, my, e) = (q[0][k], q[1][k], q[2][k], q[3][k]);
                let pres = (gamma - 1.0) * (e - 0.5 * (mx * mx + my * my) / rho);
                bad |= !(rho > 0.0) | !(pres > 0.0);
                p[k] = pres;
            }
            if bad {
                let i = (c0..c1)
                    .find(|&i| !(q[0][at + i] > 0.0 && p[at + i] > 0.0))
                    .unwrap_or(c0);
                return Err(PhysicsError::NonPhysical {
                    x: xs[i],
                    y,
                    rho: q[0][at + i],
                    p: p[at + i],
                });
            }
        }

        // fx[v][j][i]: flux through the face left of region column i, for i in 0..=w.
        for plane in fx.iter_mut() {
            plane.resize((w + 1) * h, 0.0);
        }
        for j in 0..h {
            let o = [0, 1, 2, 3].map(|k| (j + REACH) * bw + k);
            let span = j * (w + 1)..(j + 1) * (w + 1);
            let [f0, f1, f2, f3] = fx;
            let run = [
                &mut f0[span.clone()],
                &mut f1[span.clone()],
                &mut f2[span.clone()],
                &mut f3[span],
            ];
            if !face_run::<1>(q, p, o, gamma, run) {
                return Err(face_error(q, p, o, w + 1, Axis::X, gamma));
            }
        }
        // gy[v][j][i]: flux through the face below region row j, for j in 0..=h.
        for plane in gy.iter_mut() {
            plane.resize((h + 1) * w, 0.0);
        }
        for j in 0..=h {
            let o = [0, 1, 2, 3].map(|k| (j + k) * bw + REACH);
            let span = j * w..(j + 1) * w;
            let [g0, g1, g2, g3] = gy;
            let run = [
                &mut g0[span.clone()],
                &mut g1[span.clone()],
                &mut g2[span.clone()],
                &mut g3[span],
            ];
            if !face_run::<2>(q, p, o, gamma, run) {
                return Err(face_error(q, p, o, w, Axis::Y, gamma));
            }
        }
        apply_fluxes(base, region, stage, params, fx, gy, out)
    })
}

fn apply_fluxes(
    base: &FieldState,
    region: &Region,
    stage: usize,
    params: &EulerParams,
    fx: &[Vec<f64>; 4],
    gy: &[Vec<f64>; 4],
    out: &mut [f64],
) -> Result<(), PhysicsError> {
    let gamma = params.gamma;
    let (w, h) = (region.width(), region.height());
    let step = if stage == 0 { params.dt / 2.0 } else { params.dt };
    let cx = step / params.dx;
    let cy = step / params.dy;
    let plane = w * h;
    let stride = base.nx * base.ny;
    for j in 0..h {
        let y = (region.y0 + j) % base.ny;
        let row = y * base.nx;
        // Contiguous runs of x, split where the region wraps.
        let mut i0 = 0;
        while i0 < w {
            let x0 = (region.x0 + i0) % base.nx;
            let len = (w - i0).min(base.nx - x0);
            let left = j * (w + 1) + i0;
            let below = j * w + i0;
            let mut bad = false;
            for v in 0..4 {
                let src = &base.data[v * stride + row + x0..][..len];
                let fl = &fx[v][left..][..len + 1];
                let gb = &gy[v][below..][..len];
                let gt = &gy[v][below + w..][..len];
                let dst = &mut out[v * plane + below..][..len];
                for t in 0..len {
                    dst[t] = src[t] - cx * (fl[t + 1] - fl[t]) - cy * (gt[t] - gb[t]);
                }
            }
            {
                let r = &out[below..][..len];
                let mx = &out[plane + below..][..len];
                let my = &out[2 * plane + below..][..len];
                let e = &out[3 * plane + below..][..len];
                for t in 0..len {
                    let kinetic = 0.5 * (mx[t] * mx[t] + my[t] * my[t]);
                    bad |= !(r[t] > 0.0) | !(e[t] * r[t] > kinetic);
                }
                if bad {
                    let t = (0..len)
                        .find(|&t| !(r[t] > 0.0 && e[t] * r[t] > 0.5 * (mx[t] * mx[t] + my[t] * my[t])))
                        .unwrap_or(0);
                    let p = (gamma - 1.0) * (e[t] - 0.5 * (mx[t] * mx[t] + my[t] * my[t]) / r[t]);
                    return Err(PhysicsError::NonPhysical { x: x0 + t, y, rho: r[t], p });
                }
            }
            i0 += len;
        }
    }
    Ok(())
}

/// One RK2 stage over `region`. The predictor (stage 0) advances `base` by
/// half a step with fluxes of `prev`; the corrector (stage 1) advances `base`
/// by a full step with fluxes of the predicted state in `prev`.
pub fn euler_substep(
    prev: &FieldState,
    base: &FieldState,
    region: &Region,
    stage: usize,
    params: &EulerParams,
) -> Result<Vec<f64>, PhysicsError> {
    let mut out = vec![0.0; 4 * region.area()];
    substep_into(prev, base, region, stage, params, &mut out)?;
    Ok(out)
}

/// Isentropic vortex constants (all dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexSpec {
    /// Advection angle in degrees.
    pub angle_deg: f64,
    pub mach: f64,
    pub rho_inf: f64,
    pub t_inf: f64,
    pub radius: f64,
    pub sigma: f64,
    pub beta: f64,
    /// Half-width of the periodic domain `[-L, L)^2`.
    pub half_width: f64,
}

impl VortexSpec {
    pub fn standard(gamma: f64) -> Self {
        let mach = (2.0 / gamma).sqrt();
        VortexSpec {
            angle_deg: 45.0,
            mach,
            rho_inf: 1.0,
            t_inf: 1.0,
            radius: 1.0,
            sigma: 1.0,
            beta: mach * 5.0 * 2f64.sqrt() / (4.0 * PI) * 0.5f64.exp(),
            half_width: 5.0,
        }
    }

    pub fn velocity(&self) -> (f64, f64) {
        let a = self.angle_deg.to_radians();
        (self.mach * a.cos(), self.mach * a.sin())
    }

    pub fn spacing(&self, nx: usize, ny: usize) -> (f64, f64) {
        (
            2.0 * self.half_width / nx as f64,
            2.0 * self.half_width / ny as f64,
        )
    }

    /// Time for the vortex to travel `L sqrt(2)` along its direction.
    pub fn period(&self) -> f64 {
        self.half_width * 2f64.sqrt() / self.mach
    }
}

fn wrap_into(v: f64, half: f64) -> f64 {
    if v >= -half && v < half {
        return v;
    }
    (v + half).rem_euclid(2.0 * half) - half
}

fn vortex_state(x: f64, y: f64, spec: &VortexSpec, gamma: f64) -> Result<Conserved, PhysicsError> {
    let (xr, yr) = (x / spec.radius, y / spec.radius);
    let f = -(xr * xr + yr * yr) / (2.0 * spec.sigma * spec.sigma);
    let omega = spec.beta * f.exp();
    let du = -yr * omega;
    let dv = xr * omega;
    let dt = -(gamma - 1.0) / 2.0 * omega * omega;
    let base = 1.0 + dt;
    if !(base > 0.0) {
        return Err(PhysicsError::InvalidParams(format!(
            "vortex temperature factor 1 + dT = {base} is not positive"
        )));
    }
    let rho = base.powf(1.0 / (gamma - 1.0));
    let (u_inf, v_inf) = spec.velocity();
    let u = u_inf + du;
    let v = v_inf + dv;
    let p = base.powf(gamma / (gamma - 1.0)) / gamma;
    let e = p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v);
    Ok([rho, rho * u, rho * v, e])
}

/// Exact solution at time `t`: the initial vortex translated with periodic wrap.
pub fn vortex_analytic(
    nx: usize,
    ny: usize,
    spec: &VortexSpec,
    gamma: f64,
    t: f64,
) -> Result<FieldState, PhysicsError> {
    let (dx, dy) = spec.spacing(nx, ny);
    let (u, v) = spec.velocity();
    let l = spec.half_width;
    let mut f = FieldState::zeros(4, nx, ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = -l + i as f64 * dx;
            let y = -l + j as f64 * dy;
            let (xs, ys) = if t == 0.0 {
                (x, y)
            } else {
                (wrap_into(x - u * t, l), wrap_into(y - v * t, l))
            };
            let q = vortex_state(xs, ys, spec, gamma)?;
            for (var, value) in q.iter().enumerate() {
                f.set(var, i, j, *value);
            }
        }
    }
    Ok(f)
}

pub fn vortex_init(
    nx: usize,
    ny: usize,
    spec: &VortexSpec,
    gamma: f64,
) -> Result<FieldState, PhysicsError> {
    vortex_analytic(nx, ny, spec, gamma, 0.0)
}

/// Largest stable timestep for `cfl` against the field's spectral radii.
pub fn cfl_timestep(field: &FieldState, gamma: f64, dx: f64, dy: f64, cfl: f64) -> Result<f64, PhysicsError> {
    let mut worst = 0.0f64;
    for y in 0..field.ny {
        for x in 0..field.nx {
            let q = [
                field.get(0, x, y),
                field.get(1, x, y),
                field.get(2, x, y),
                field.get(3, x, y),
            ];
            let p = pressure(&q, gamma)?;
            let rate = spectral_radius(&q, p, Axis::X, gamma) / dx
                + spectral_radius(&q, p, Axis::Y, gamma) / dy;
            worst = worst.max(rate);
        }
    }
    Ok(cfl / worst)
}

#[derive(Debug, Clone)]
pub struct EulerScheme {
    pub params: EulerParams,
}

impl EulerScheme {
    pub fn new(params: EulerParams) -> Result<Self, PhysicsError> {
        params.check()?;
        Ok(EulerScheme { params })
    }
}

impl Scheme for EulerScheme {
    fn nvars(&self) -> usize {
        4
    }

    fn stencil(&self) -> StencilShape {
        StencilShape::rk2(REACH).expect("valid stencil")
    }

    fn update_region(
        &self,
        stage: usize,
        prev: &FieldState,
        base: &FieldState,
        region: &Region,
        out: &mut [f64],
    ) -> Result<(), PhysicsError> {
        substep_into(prev, base, region, stage, &self.params, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 1.4;

    fn uniform(nx: usize, ny: usize, q: Conserved) -> FieldState {
        FieldState::from_fn(4, nx, ny, |v, _, _| q[v])
    }

    fn params(nx: usize) -> EulerParams {
        let spec = VortexSpec::standard(GAMMA);
        let (dx, dy) = spec.spacing(nx, nx);
        EulerParams {
            gamma: GAMMA,
            dx,
            dy,
            dt: 0.4 * dx / 3.0,
            cfl: 0.4,
        }
    }

    fn rk2_step(q: &FieldState, p: &EulerParams) -> FieldState {
        let all = Region::new(0, q.nx, 0, q.ny, 1);
        let mut star = q.clone();
        star.data = euler_substep(q, q, &all, 0, p).unwrap();
        let mut next = q.clone();
        next.data = euler_substep(&star, q, &all, 1, p).unwrap();
        next
    }

    #[test]
    fn pressure_examples() {
        assert!((pressure(&[1.0, 0.0, 0.0, 2.5], GAMMA).unwrap() - 1.0).abs() < 1e-15);
        assert!((pressure(&[1.0, 1.0, 0.0, 3.0], GAMMA).unwrap() - 1.0).abs() < 1e-15);
        assert!(pressure(&[1.0, 0.0, 0.0, 0.0], GAMMA).is_err());
        assert!(pressure(&[0.0, 0.0, 0.0, 1.0], GAMMA).is_err());
    }

    #[test]
    fn far_field_pressure_is_inverse_gamma() {
        let spec = VortexSpec::standard(GAMMA);
        let q = vortex_state(1e3, -1e3, &spec, GAMMA).unwrap();
        assert!((pressure(&q, GAMMA).unwrap() - 1.0 / GAMMA).abs() < 1e-12);
        assert!((q[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vortex_constants() {
        let spec = VortexSpec::standard(GAMMA);
        assert!((spec.mach - (2.0f64 / 1.4).sqrt()).abs() < 1e-15);
        // Frozen from M * 5 sqrt(2) / (4 pi) * e^(1/2) evaluated in double precision.
        assert!((spec.beta - 1.108_851_425_407_906_5).abs() < 1e-12);
        let f = vortex_init(64, 64, &spec, GAMMA).unwrap();
        // Origin sits at node (32, 32).
        let dtemp = -(GAMMA - 1.0) / 2.0 * spec.beta * spec.beta;
        let rho = f.get(0, 32, 32);
        assert!((rho - (1.0 + dtemp).powf(1.0 / (GAMMA - 1.0))).abs() < 1e-14);
        assert!((dtemp - (-0.245_910_296_725_829_15)).abs() < 1e-14);
    }

    #[test]
    fn analytic_at_zero_is_initial_field() {
        let spec = VortexSpec::standard(GAMMA);
        let a = vortex_init(32, 32, &spec, GAMMA).unwrap();
        let b = vortex_analytic(32, 32, &spec, GAMMA, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_vortex_rejected() {
        let mut spec = VortexSpec::standard(GAMMA);
        spec.beta = 10.0;
        assert!(vortex_init(16, 16, &spec, GAMMA).is_err());
    }

    #[test]
    fn reconstruction_cases() {
        let q: [Conserved; 4] = [
            [1.0, 0.1, 0.2, 2.5],
            [1.1, 0.2, 0.3, 2.6],
            [1.2, 0.3, 0.4, 2.7],
            [1.3, 0.4, 0.5, 2.8],
        ];
        // Uniform field: differences vanish, limiter off.
        let (l, r) = minmod_reconstruct([&q[1]; 4], [1.0; 4]);
        assert_eq!(l, q[1]);
        assert_eq!(r, q[1]);
        // Linear pressure: ratio 1, half-way states.
        let (l, r) = minmod_reconstruct([&q[0], &q[1], &q[2], &q[3]], [1.0, 2.0, 3.0, 4.0]);
        for v in 0..4 {
            assert!((l[v] - (q[1][v] + 0.5 * (q[2][v] - q[1][v]))).abs() < 1e-15);
            assert!((r[v] - (q[2][v] + 0.5 * (q[1][v] - q[2][v]))).abs() < 1e-15);
        }
        // Extremum at i: negative ratio, no reconstruction on the left.
        let (l, _) = minmod_reconstruct([&q[0], &q[1], &q[2], &q[3]], [1.0, 2.0, 1.5, 1.0]);
        assert_eq!(l, q[1]);
        // Ratio above one is capped.
        let (l, _) = minmod_reconstruct([&q[0], &q[1], &q[2], &q[3]], [1.0, 1.5, 3.0, 4.0]);
        for v in 0..4 {
            assert!((l[v] - (q[1][v] + 0.5 * (q[2][v] - q[1][v]))).abs() < 1e-15);
        }
    }

    #[test]
    fn flux_examples() {
        let still = [1.0, 0.0, 0.0, 2.5];
        let f = interface_flux(&still, &still, Axis::X, GAMMA).unwrap();
        for (got, want) in f.iter().zip([0.0, 1.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-15, "{f:?}");
        }
        let q = [1.2, 0.3, -0.4, 3.1];
        let p = pressure(&q, GAMMA).unwrap();
        for axis in [Axis::X, Axis::Y] {
            let f = interface_flux(&q, &q, axis, GAMMA).unwrap();
            assert_eq!(f, physical_flux(&q, p, axis));
        }
        // rho = 1, p = 1/gamma, u = 0.5: sound speed 1.
        let q = [1.0, 0.5, 0.0, (1.0 / GAMMA) / (GAMMA - 1.0) + 0.125];
        let p = pressure(&q, GAMMA).unwrap();
        assert!((spectral_radius(&q, p, Axis::X, GAMMA) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn uniform_flow_is_fixed_point() {
        let q = [1.0, 0.6, -0.3, 3.0];
        let f = uniform(12, 12, q);
        let next = rk2_step(&f, &params(12));
        for v in 0..4 {
            for value in next.plane(v) {
                assert!((value - q[v]).abs() <= 1e-15 * q[v].abs().max(1.0));
            }
        }
    }

    #[test]
    fn periodic_sums_are_conserved() {
        let spec = VortexSpec::standard(GAMMA);
        let n = 32;
        let mut f = vortex_init(n, n, &spec, GAMMA).unwrap();
        let p = params(n);
        let before = f.sums();
        for _ in 0..5 {
            f = rk2_step(&f, &p);
        }
        for (a, b) in before.iter().zip(f.sums()) {
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn region_split_is_bit_identical() {
        let spec = VortexSpec::standard(GAMMA);
        let n = 16;
        let f = vortex_init(n, n, &spec, GAMMA).unwrap();
        let p = params(n);
        let whole = euler_substep(&f, &f, &Region::new(0, n, 0, n, 1), 0, &p).unwrap();
        let mut pieced = FieldState::zeros(4, n, n);
        for (x0, x1, y0, y1) in [(0, 5, 0, 16), (5, 16, 0, 9), (5, 16, 9, 16)] {
            let r = Region::new(x0, x1, y0, y1, 1);
            pieced.scatter(&r, &euler_substep(&f, &f, &r, 0, &p).unwrap());
        }
        assert_eq!(pieced.data, whole);
    }

    #[test]
    fn row_kernel_matches_scalar_fluxes() {
        let spec = VortexSpec::standard(GAMMA);
        let n = 16;
        let f = vortex_init(n, n, &spec, GAMMA).unwrap();
        let p = params(n);
        let r = Region::new(3, 14, 2, 9, 1);
        let got = euler_substep(&f, &f, &r, 1, &p).unwrap();
        let cell = |x: i64, y: i64| {
            let (x, y) = (x.rem_euclid(n as i64) as usize, y.rem_euclid(n as i64) as usize);
            let q = [f.get(0, x, y), f.get(1, x, y), f.get(2, x, y), f.get(3, x, y)];
            (q, pressure(&q, GAMMA).unwrap())
        };
        let face = |cells: [(Conserved, f64); 4], axis| {
            let (l, r) = minmod_reconstruct(
                [&cells[0].0, &cells[1].0, &cells[2].0, &cells[3].0],
                [cells[0].1, cells[1].1, cells[2].1, cells[3].1],
            );
            interface_flux(&l, &r, axis, GAMMA).unwrap()
        };
        let xface = |x: i64, y: i64| face([cell(x - 2, y), cell(x - 1, y), cell(x, y), cell(x + 1, y)], Axis::X);
        let yface = |x: i64, y: i64| face([cell(x, y - 2), cell(x, y - 1), cell(x, y), cell(x, y + 1)], Axis::Y);
        let (w, h) = (r.width(), r.height());
        for j in 0..h {
            for i in 0..w {
                let (x, y) = ((r.x0 + i) as i64, (r.y0 + j) as i64);
                let (fl, fr, gb, gt) = (xface(x, y), xface(x + 1, y), yface(x, y), yface(x, y + 1));
                for v in 0..4 {
                    let want = f.get(v, x as usize, y as usize)
                        - p.dt / p.dx * (fr[v] - fl[v])
                        - p.dt / p.dy * (gt[v] - gb[v]);
                    assert_eq!(got[v * w * h + j * w + i], want, "v={v} at ({x}, {y})");
                }
            }
        }
    }
}
