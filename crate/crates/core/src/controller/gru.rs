//! Small dense linear algebra and a gated recurrent cell with manual
//! backward pass. Everything is f64 so the policy gradient can be verified
//! against central finite differences.

use serde::{Deserialize, Serialize};

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = self . x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(&w, &v)| w * v).sum())
            .collect()
    }

    /// y = self^T . x
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (r, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            for (c, &w) in self.row(r).iter().enumerate() {
                y[c] += w * xv;
            }
        }
        y
    }

    /// self += a . u v^T
    pub fn add_outer(&mut self, a: f64, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, &uv) in u.iter().enumerate() {
            let row = self.row_mut(r);
            for (c, &vv) in v.iter().enumerate() {
                row[c] += a * uv * vv;
            }
        }
    }
}

pub(crate) fn add_scaled(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gated recurrent cell parameters: update gate z, reset gate r, candidate h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct GruParams {
    pub w_z: Mat,
    pub u_z: Mat,
    pub b_z: Vec<f64>,
    pub w_r: Mat,
    pub u_r: Mat,
    pub b_r: Vec<f64>,
    pub w_h: Mat,
    pub u_h: Mat,
    pub b_h: Vec<f64>,
}

/// Intermediate values of one cell step, kept for backprop.
pub(crate) struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub rh: Vec<f64>,
    pub cand: Vec<f64>,
}

impl GruParams {
    pub fn zeros(hidden: usize, embed: usize) -> Self {
        GruParams {
            w_z: Mat::zeros(hidden, embed),
            u_z: Mat::zeros(hidden, hidden),
            b_z: vec![0.0; hidden],
            w_r: Mat::zeros(hidden, embed),
            u_r: Mat::zeros(hidden, hidden),
            b_r: vec![0.0; hidden],
            w_h: Mat::zeros(hidden, embed),
            u_h: Mat::zeros(hidden, hidden),
            b_h: vec![0.0; hidden],
        }
    }

    /// h' = (1-z) . h + z . tanh(W_h x + U_h (r.h) + b_h)
    pub fn forward(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, GruCache) {
        let gate = |w: &Mat, u: &Mat, b: &[f64], uh: &[f64]| -> Vec<f64> {
            let mut a = w.matvec(x);
            add_scaled(&mut a, 1.0, &u.matvec(uh));
            add_scaled(&mut a, 1.0, b);
            a
        };
        let z: Vec<f64> = gate(&self.w_z, &self.u_z, &self.b_z, h).iter().map(|&a| sigmoid(a)).collect();
        let r: Vec<f64> = gate(&self.w_r, &self.u_r, &self.b_r, h).iter().map(|&a| sigmoid(a)).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(&rv, &hv)| rv * hv).collect();
        let cand: Vec<f64> = gate(&self.w_h, &self.u_h, &self.b_h, &rh)
            .iter()
            .map(|&a| a.tanh())
            .collect();
        let h_new: Vec<f64> = z
            .iter()
            .zip(&cand)
            .zip(h)
            .map(|((&zv, &cv), &hv)| (1.0 - zv) * hv + zv * cv)
            .collect();
        (
            h_new,
            GruCache {
                x: x.to_vec(),
                h_prev: h.to_vec(),
                z,
                r,
                rh,
                cand,
            },
        )
    }

    /// Accumulates parameter gradients for one step; returns (dx, dh_prev).
    pub fn backward(&self, cache: &GruCache, dh_new: &[f64], grads: &mut GruParams) -> (Vec<f64>, Vec<f64>) {
        let n = dh_new.len();
        let mut dh = vec![0.0; n];
        let mut dz = vec![0.0; n];
        let mut dcand = vec![0.0; n];
        for i in 0..n {
            dz[i] = dh_new[i] * (cache.cand[i] - cache.h_prev[i]);
            dcand[i] = dh_new[i] * cache.z[i];
            dh[i] = dh_new[i] * (1.0 - cache.z[i]);
        }

        // Candidate branch (tanh).
        let da_h: Vec<f64> = dcand
            .iter()
            .zip(&cache.cand)
            .map(|(&d, &c)| d * (1.0 - c * c))
            .collect();
        grads.w_h.add_outer(1.0, &da_h, &cache.x);
        grads.u_h.add_outer(1.0, &da_h, &cache.rh);
        add_scaled(&mut grads.b_h, 1.0, &da_h);
        let drh = self.u_h.matvec_t(&da_h);
        let mut dr = vec![0.0; n];
        for i in 0..n {
            dr[i] = drh[i] * cache.h_prev[i];
            dh[i] += drh[i] * cache.r[i];
        }

        // Gates (sigmoid).
        let da_z: Vec<f64> = dz.iter().zip(&cache.z).map(|(&d, &z)| d * z * (1.0 - z)).collect();
        grads.w_z.add_outer(1.0, &da_z, &cache.x);
        grads.u_z.add_outer(1.0, &da_z, &cache.h_prev);
        add_scaled(&mut grads.b_z, 1.0, &da_z);
        add_scaled(&mut dh, 1.0, &self.u_z.matvec_t(&da_z));

        let da_r: Vec<f64> = dr.iter().zip(&cache.r).map(|(&d, &r)| d * r * (1.0 - r)).collect();
        grads.w_r.add_outer(1.0, &da_r, &cache.x);
        grads.u_r.add_outer(1.0, &da_r, &cache.h_prev);
        add_scaled(&mut grads.b_r, 1.0, &da_r);
        add_scaled(&mut dh, 1.0, &self.u_r.matvec_t(&da_r));

        let mut dx = self.w_z.matvec_t(&da_z);
        add_scaled(&mut dx, 1.0, &self.w_r.matvec_t(&da_r));
        add_scaled(&mut dx, 1.0, &self.w_h.matvec_t(&da_h));
        (dx, dh)
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for m in [&self.w_z, &self.u_z] {
            out.extend_from_slice(&m.data);
        }
        out.extend_from_slice(&self.b_z);
        for m in [&self.w_r, &self.u_r] {
            out.extend_from_slice(&m.data);
        }
        out.extend_from_slice(&self.b_r);
        for m in [&self.w_h, &self.u_h] {
            out.extend_from_slice(&m.data);
        }
        out.extend_from_slice(&self.b_h);
    }

    pub fn load_from(&mut self, it: &mut impl Iterator<Item = f64>) {
        for slot in [
            &mut self.w_z.data,
            &mut self.u_z.data,
            &mut self.b_z,
            &mut self.w_r.data,
            &mut self.u_r.data,
            &mut self.b_r,
            &mut self.w_h.data,
            &mut self.u_h.data,
            &mut self.b_h,
        ] {
            for v in slot.iter_mut() {
                *v = it.next().expect("parameter vector too short");
            }
        }
    }
}
