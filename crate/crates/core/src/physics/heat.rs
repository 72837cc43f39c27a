use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{PhysicsError, Scheme};
use crate::field::FieldState;
use crate::geometry::{Region, StencilShape};

/// Forward-Euler, three-point-per-axis heat diffusion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatParams {
    /// Thermal diffusivity k / (rho c_p).
    pub alpha: f64,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
}

impl HeatParams {
    /// Unit square with `nx x ny` nodes and a timestep set by the Fourier number.
    pub fn unit_square(nx: usize, ny: usize, alpha: f64, fourier: f64) -> Self {
        let dx = 1.0 / nx as f64;
        let dy = 1.0 / ny as f64;
        HeatParams {
            alpha,
            dx,
            dy,
            dt: fourier * dx * dx / alpha,
        }
    }

    pub fn stability_number(&self) -> f64 {
        self.alpha * self.dt * (1.0 / (self.dx * self.dx) + 1.0 / (self.dy * self.dy))
    }

    pub fn check(&self) -> Result<(), PhysicsError> {
        if !(self.alpha > 0.0 && self.dx > 0.0 && self.dy > 0.0 && self.dt > 0.0) {
            return Err(PhysicsError::InvalidParams(format!("{self:?}")));
        }
        let s = self.stability_number();
        if s > 0.5 {
            return Err(PhysicsError::Unstable(format!(
                "alpha dt (1/dx^2 + 1/dy^2) = {s} exceeds 1/2"
            )));
        }
        Ok(())
    }
}

pub fn heat_analytic(x: f64, y: f64, t: f64, alpha: f64) -> f64 {
    (2.0 * PI * x).sin() * (2.0 * PI * y).sin() * (-8.0 * PI * PI * alpha * t).exp()
}

/// Analytic temperature sampled on the `nx x ny` node grid of the unit square.
pub fn heat_field(nx: usize, ny: usize, t: f64, alpha: f64) -> FieldState {
    let dx = 1.0 / nx as f64;
    let dy = 1.0 / ny as f64;
    FieldState::from_fn(1, nx, ny, |_, i, j| {
        heat_analytic(i as f64 * dx, j as f64 * dy, t, alpha)
    })
}

fn update_into(
    input: &FieldState,
    region: &Region,
    params: &HeatParams,
    out: &mut [f64],
) -> Result<(), PhysicsError> {
    let cx = params.alpha * params.dt / (params.dx * params.dx);
    let cy = params.alpha * params.dt / (params.dy * params.dy);
    let (nx, ny) = (input.nx, input.ny);
    let w = region.width();
    let interior_x = region.x0 >= 1 && region.x1 < nx;
    let t = input.plane(0);
    for j in 0..region.height() {
        let y = (region.y0 + j) % ny;
        let yn = (y + 1) % ny;
        let ys = (y + ny - 1) % ny;
        let row = &t[y * nx..(y + 1) * nx];
        let north = &t[yn * nx..(yn + 1) * nx];
        let south = &t[ys * nx..(ys + 1) * nx];
        let dst = &mut out[j * w..(j + 1) * w];
        for (i, d) in dst.iter_mut().enumerate() {
            let xr = region.x0 + i;
            let (x, xe, xw) = if interior_x {
                (xr, xr + 1, xr - 1)
            } else {
                let x = xr % nx;
                (x, (x + 1) % nx, (x + nx - 1) % nx)
            };
            let c = row[x];
            let v = c + cx * (row[xe] - 2.0 * c + row[xw]) + cy * (north[x] - 2.0 * c + south[x]);
            if !v.is_finite() {
                return Err(PhysicsError::NonFinite { x, y });
            }
            *d = v;
        }
    }
    Ok(())
}

/// New temperatures for every point of `region`, row-major over the region.
pub fn heat_update(
    in_plane: &FieldState,
    region: &Region,
    params: &HeatParams,
) -> Result<Vec<f64>, PhysicsError> {
    let mut out = vec![0.0; region.area()];
    update_into(in_plane, region, params, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct HeatScheme {
    pub params: HeatParams,
}

impl HeatScheme {
    pub fn new(params: HeatParams) -> Result<Self, PhysicsError> {
        params.check()?;
        Ok(HeatScheme { params })
    }
}

impl Scheme for HeatScheme {
    fn nvars(&self) -> usize {
        1
    }

    fn stencil(&self) -> StencilShape {
        StencilShape::single_stage(1).expect("valid stencil")
    }

    fn update_region(
        &self,
        _stage: usize,
        prev: &FieldState,
        _base: &FieldState,
        region: &Region,
        out: &mut [f64],
    ) -> Result<(), PhysicsError> {
        update_into(prev, region, &self.params, out)
    }
}
