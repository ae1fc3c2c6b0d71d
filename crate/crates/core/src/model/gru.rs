//! Gated recurrent unit:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```

use ndarray::{s, Array1, Array2, ArrayView1};

use super::params::GruParams;

#[derive(Debug, Clone)]
pub(crate) struct GruStep {
    pub x: Array1<f64>,
    pub h: Array1<f64>,
    pub z: Array1<f64>,
    pub r: Array1<f64>,
    pub cand: Array1<f64>,
    pub out: Array1<f64>,
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn forward(p: &GruParams, x: ArrayView1<f64>, h: ArrayView1<f64>) -> GruStep {
    let n = p.hidden();
    let wx = p.w.dot(&x) + &p.b;
    let uz = p.u.slice(s![0..n, ..]).dot(&h);
    let ur = p.u.slice(s![n..2 * n, ..]).dot(&h);

    let z = (&wx.slice(s![0..n]) + &uz).mapv(sigmoid);
    let r = (&wx.slice(s![n..2 * n]) + &ur).mapv(sigmoid);
    let rh = &r * &h;
    let cand = (&wx.slice(s![2 * n..]) + &p.u.slice(s![2 * n.., ..]).dot(&rh)).mapv(f64::tanh);
    let out = &h + &(&z * &(&cand - &h));

    GruStep {
        x: x.to_owned(),
        h: h.to_owned(),
        z,
        r,
        cand,
        out,
    }
}

/// Accumulates parameter gradients into `grad`; returns `(dx, dh)`.
pub(crate) fn backward(
    p: &GruParams,
    step: &GruStep,
    d_out: &Array1<f64>,
    grad: &mut GruParams,
) -> (Array1<f64>, Array1<f64>) {
    let n = p.hidden();
    let GruStep { x, h, z, r, cand, .. } = step;

    let dz = d_out * &(cand - h);
    let dcand = d_out * z;
    let mut dh = d_out * &z.mapv(|v| 1.0 - v);

    let dpre_c = &dcand * &cand.mapv(|c| 1.0 - c * c);
    let rh = r * h;
    let u_c = p.u.slice(s![2 * n.., ..]);
    let drh = u_c.t().dot(&dpre_c);
    let dr = &drh * h;
    dh += &(&drh * r);

    let dpre_z = &dz * &z.mapv(|v| v * (1.0 - v));
    let dpre_r = &dr * &r.mapv(|v| v * (1.0 - v));

    let mut dpre = Array1::zeros(3 * n);
    dpre.slice_mut(s![0..n]).assign(&dpre_z);
    dpre.slice_mut(s![n..2 * n]).assign(&dpre_r);
    dpre.slice_mut(s![2 * n..]).assign(&dpre_c);

    add_outer(&mut grad.w, &dpre, x.view());
    grad.b += &dpre;
    let dx = p.w.t().dot(&dpre);

    add_outer_rows(&mut grad.u, 0, &dpre_z, h.view());
    add_outer_rows(&mut grad.u, n, &dpre_r, h.view());
    add_outer_rows(&mut grad.u, 2 * n, &dpre_c, rh.view());
    dh += &p.u.slice(s![0..n, ..]).t().dot(&dpre_z);
    dh += &p.u.slice(s![n..2 * n, ..]).t().dot(&dpre_r);

    (dx, dh)
}

/// `m += a ⊗ b`
pub(crate) fn add_outer(m: &mut Array2<f64>, a: &Array1<f64>, b: ArrayView1<f64>) {
    add_outer_rows(m, 0, a, b);
}

/// `m[offset.., :] += a ⊗ b`
pub(crate) fn add_outer_rows(
    m: &mut Array2<f64>,
    offset: usize,
    a: &Array1<f64>,
    b: ArrayView1<f64>,
) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            m.row_mut(offset + i).scaled_add(ai, &b);
        }
    }
}
