//! Finite-volume Crank–Nicolson solver for the vertical drift–diffusion problem
//!
//! ```text
//! ∂_t p = v ∂_z p + D ∂_z² p        0 < z < h
//! D ∂_z p + v p = 0                 z = 0, h
//! p(z, 0) = δ(z − z0)
//! ```
//!
//! Serves as an independent reference for the eigenfunction series.
//! The probability flux `J = −v p − D ∂_z p` is evaluated on cell faces with
//! central averaging and set to zero on both walls, so mass is conserved to
//! round-off. The delta start is a unit mass in the cell holding `z0`; the
//! first steps are backward Euler (Rannacher start-up) to damp the
//! Crank–Nicolson oscillations that a discontinuous start would excite.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOracle {
    pub diffusion: f64,
    pub drift: f64,
    pub height: f64,
    pub release: f64,
    pub cells: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub height: f64,
    pub values: Vec<f64>,
}

impl FdOracle {
    /// Solution at time `t`, stepped with `dt` (the last step is shortened to
    /// land exactly on `t`).
    pub fn solve(&self, t: f64) -> FdSolution {
        let n = self.cells;
        let dz = self.height / n as f64;
        let (lower, diag, upper) = self.operator(dz);

        let mut p = vec![0.0; n];
        let cell = ((self.release / dz) as usize).min(n - 1);
        p[cell] = 1.0 / dz;

        let startup = 4usize;
        let mut elapsed = 0.0;
        let mut step = 0usize;
        while elapsed < t * (1.0 - 1e-14) {
            let (theta, dt) = if step < startup {
                (1.0, (0.5 * self.dt).min(t - elapsed))
            } else {
                (0.5, self.dt.min(t - elapsed))
            };
            p = advance(&p, &lower, &diag, &upper, theta, dt);
            elapsed += dt;
            step += 1;
        }
        FdSolution {
            height: self.height,
            values: p,
        }
    }

    /// Tridiagonal bands of the semi-discrete operator dp/dt = L p.
    fn operator(&self, dz: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.cells;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        // Face flux J_{i+1/2} = a p_i + b p_{i+1}.
        let a = -0.5 * self.drift + self.diffusion / dz;
        let b = -0.5 * self.drift - self.diffusion / dz;
        for i in 0..n - 1 {
            diag[i] -= a / dz;
            upper[i] -= b / dz;
            lower[i + 1] += a / dz;
            diag[i + 1] += b / dz;
        }
        (lower, diag, upper)
    }
}

/// One θ-step: (I − θ dt L) p' = (I + (1 − θ) dt L) p.
fn advance(p: &[f64], lower: &[f64], diag: &[f64], upper: &[f64], theta: f64, dt: f64) -> Vec<f64> {
    let n = p.len();
    let explicit = (1.0 - theta) * dt;
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let mut lp = diag[i] * p[i];
        if i > 0 {
            lp += lower[i] * p[i - 1];
        }
        if i + 1 < n {
            lp += upper[i] * p[i + 1];
        }
        rhs[i] = p[i] + explicit * lp;
    }
    let implicit = theta * dt;
    let sub: Vec<f64> = lower.iter().map(|l| -implicit * l).collect();
    let main: Vec<f64> = diag.iter().map(|d| 1.0 - implicit * d).collect();
    let sup: Vec<f64> = upper.iter().map(|u| -implicit * u).collect();
    thomas(&sub, &main, &sup, &rhs)
}

fn thomas(sub: &[f64], main: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / main[0];
    d[0] = rhs[0] / main[0];
    for i in 1..n {
        let m = main[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

impl FdSolution {
    pub fn mass(&self) -> f64 {
        let dz = self.height / self.values.len() as f64;
        self.values.iter().sum::<f64>() * dz
    }

    /// Density at `z` by linear interpolation between cell centres, linearly
    /// extrapolated over the half cells next to the walls.
    pub fn at(&self, z: f64) -> f64 {
        let n = self.values.len();
        let dz = self.height / n as f64;
        let s = (z / dz - 0.5).clamp(-0.5, n as f64 - 0.5);
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        let w = s - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }
}
