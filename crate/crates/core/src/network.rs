//! Nodal power injections in polar form and their partial derivatives.

use crate::grid_model::AdmittanceMatrix;

/// Active and reactive injection at bus `r`:
///
/// ```text
/// P_r = V_r Σ_j V_j [G_rj cos δ_rj + B_rj sin δ_rj]
/// Q_r = V_r Σ_j V_j [G_rj sin δ_rj − B_rj cos δ_rj]
/// ```
pub fn injection(y: &AdmittanceMatrix, v: &[f64], delta: &[f64], r: usize) -> (f64, f64) {
    let (mut p, mut q) = (0.0, 0.0);
    for j in 0..v.len() {
        let (g, b) = (y.g[(r, j)], y.b[(r, j)]);
        if g == 0.0 && b == 0.0 {
            continue;
        }
        let (s, c) = (delta[r] - delta[j]).sin_cos();
        p += v[j] * (g * c + b * s);
        q += v[j] * (g * s - b * c);
    }
    (v[r] * p, v[r] * q)
}

/// Partials of the injection at bus `r` with respect to every bus angle and
/// magnitude.
#[derive(Debug, Clone)]
pub struct InjectionPartials {
    pub dp_ddelta: Vec<f64>,
    pub dp_dv: Vec<f64>,
    pub dq_ddelta: Vec<f64>,
    pub dq_dv: Vec<f64>,
}

pub fn injection_partials(
    y: &AdmittanceMatrix,
    v: &[f64],
    delta: &[f64],
    r: usize,
) -> InjectionPartials {
    let n = v.len();
    let mut out = InjectionPartials {
        dp_ddelta: vec![0.0; n],
        dp_dv: vec![0.0; n],
        dq_ddelta: vec![0.0; n],
        dq_dv: vec![0.0; n],
    };
    let vr = v[r];
    let (mut sum_p, mut sum_q) = (0.0, 0.0);
    for j in 0..n {
        let (g, b) = (y.g[(r, j)], y.b[(r, j)]);
        if g == 0.0 && b == 0.0 {
            continue;
        }
        let (s, c) = (delta[r] - delta[j]).sin_cos();
        let pc = g * c + b * s;
        let qc = g * s - b * c;
        sum_p += v[j] * pc;
        sum_q += v[j] * qc;
        if j != r {
            out.dp_ddelta[j] = vr * v[j] * (g * s - b * c);
            out.dq_ddelta[j] = -vr * v[j] * (g * c + b * s);
            out.dp_dv[j] = vr * pc;
            out.dq_dv[j] = vr * qc;
        }
    }
    // diagonal terms
    let (grr, brr) = (y.g[(r, r)], y.b[(r, r)]);
    out.dp_ddelta[r] = -vr * (sum_q - vr * (-brr));
    out.dq_ddelta[r] = vr * (sum_p - vr * grr);
    out.dp_dv[r] = sum_p + vr * grr;
    out.dq_dv[r] = sum_q - vr * brr;
    out
}
