//! Explicit-loop numeric kernels: 'same'-padded convolution, 2x2 max pool,
//! and dense matmul, each with its backward pass.

use crate::tensor::Tensor;

/// y[b,f,oy,ox] = bias[f] + sum_{c,ky,kx} x[b,c,oy+ky-ph,ox+kx-pw] * w[f,c,ky,kx]
pub fn conv2d(x: &Tensor, w: &Tensor, bias: &Tensor) -> Tensor {
    let (b, c, h, wid) = dims4(x);
    let (f, _, fh, fw) = dims4(w);
    let (ph, pw) = ((fh - 1) / 2, (fw - 1) / 2);
    let xd = x.data();
    let wd = w.data();
    let bd = bias.data();
    let mut out = vec![0.0; b * f * h * wid];
    for bi in 0..b {
        for fi in 0..f {
            let w_f = &wd[fi * c * fh * fw..(fi + 1) * c * fh * fw];
            for oy in 0..h {
                for ox in 0..wid {
                    let mut acc = bd[fi];
                    for ci in 0..c {
                        let x_c = &xd[(bi * c + ci) * h * wid..(bi * c + ci + 1) * h * wid];
                        let w_c = &w_f[ci * fh * fw..(ci + 1) * fh * fw];
                        for ky in 0..fh {
                            let iy = oy + ky;
                            if iy < ph || iy - ph >= h {
                                continue;
                            }
                            let iy = iy - ph;
                            for kx in 0..fw {
                                let ix = ox + kx;
                                if ix < pw || ix - pw >= wid {
                                    continue;
                                }
                                acc += x_c[iy * wid + (ix - pw)] * w_c[ky * fw + kx];
                            }
                        }
                    }
                    out[((bi * f + fi) * h + oy) * wid + ox] = acc;
                }
            }
        }
    }
    Tensor::from_vec(&[b, f, h, wid], out).expect("conv output shape")
}

/// Gradients of `conv2d` wrt input, weights, and bias.
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (b, c, h, wid) = dims4(x);
    let (f, _, fh, fw) = dims4(w);
    let (ph, pw) = ((fh - 1) / 2, (fw - 1) / 2);
    let xd = x.data();
    let wd = w.data();
    let dyd = dy.data();
    let mut dx = vec![0.0; xd.len()];
    let mut dw = vec![0.0; wd.len()];
    let mut db = vec![0.0; f];
    for bi in 0..b {
        for fi in 0..f {
            for oy in 0..h {
                for ox in 0..wid {
                    let g = dyd[((bi * f + fi) * h + oy) * wid + ox];
                    if g == 0.0 {
                        continue;
                    }
                    db[fi] += g;
                    for ci in 0..c {
                        let x_base = (bi * c + ci) * h * wid;
                        let w_base = (fi * c + ci) * fh * fw;
                        for ky in 0..fh {
                            let iy = oy + ky;
                            if iy < ph || iy - ph >= h {
                                continue;
                            }
                            let iy = iy - ph;
                            for kx in 0..fw {
                                let ix = ox + kx;
                                if ix < pw || ix - pw >= wid {
                                    continue;
                                }
                                let ix = ix - pw;
                                dw[w_base + ky * fw + kx] += g * xd[x_base + iy * wid + ix];
                                dx[x_base + iy * wid + ix] += g * wd[w_base + ky * fw + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::from_vec(x.shape(), dx).unwrap(),
        Tensor::from_vec(w.shape(), dw).unwrap(),
        Tensor::from_vec(&[f], db).unwrap(),
    )
}

/// 2x2 stride-2 max pool; odd trailing rows/columns are dropped. Returns the
/// pooled tensor and the flat input index of each selected maximum (first
/// maximum wins ties).
pub fn maxpool2(x: &Tensor) -> (Tensor, Vec<usize>) {
    let (b, c, h, w) = dims4(x);
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = vec![0.0; b * c * oh * ow];
    let mut argmax = vec![0usize; out.len()];
    for bc in 0..b * c {
        let base = bc * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for ky in 0..2 {
                    for kx in 0..2 {
                        let idx = base + (2 * oy + ky) * w + 2 * ox + kx;
                        if xd[idx] > best {
                            best = xd[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = bc * oh * ow + oy * ow + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    (
        Tensor::from_vec(&[b, c, oh, ow], out).unwrap(),
        argmax,
    )
}

pub fn maxpool2_backward(dy: &Tensor, argmax: &[usize], input_len: usize, input_shape: &[usize]) -> Tensor {
    let mut dx = vec![0.0; input_len];
    for (o, &i) in argmax.iter().enumerate() {
        dx[i] += dy.data()[o];
    }
    Tensor::from_vec(input_shape, dx).unwrap()
}

/// y[b,o] = bias[o] + sum_i x[b,i] * w[i,o]; x is (batch, fan_in) flattened.
pub fn dense(x: &Tensor, w: &Tensor, bias: &Tensor) -> Tensor {
    let (fan_in, fan_out) = dims2(w);
    let b = x.len() / fan_in;
    let xd = x.data();
    let wd = w.data();
    let bd = bias.data();
    let mut out = vec![0.0; b * fan_out];
    for bi in 0..b {
        let x_row = &xd[bi * fan_in..(bi + 1) * fan_in];
        let o_row = &mut out[bi * fan_out..(bi + 1) * fan_out];
        o_row.copy_from_slice(bd);
        for (i, &xv) in x_row.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let w_row = &wd[i * fan_out..(i + 1) * fan_out];
            for (o, &wv) in w_row.iter().enumerate() {
                o_row[o] += xv * wv;
            }
        }
    }
    Tensor::from_vec(&[b, fan_out], out).unwrap()
}

pub fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (fan_in, fan_out) = dims2(w);
    let b = x.len() / fan_in;
    let xd = x.data();
    let wd = w.data();
    let dyd = dy.data();
    let mut dx = vec![0.0; xd.len()];
    let mut dw = vec![0.0; wd.len()];
    let mut db = vec![0.0; fan_out];
    for bi in 0..b {
        let dy_row = &dyd[bi * fan_out..(bi + 1) * fan_out];
        for (o, &g) in dy_row.iter().enumerate() {
            db[o] += g;
        }
        for i in 0..fan_in {
            let xv = xd[bi * fan_in + i];
            let w_row = &wd[i * fan_out..(i + 1) * fan_out];
            let mut acc = 0.0;
            let dw_row = &mut dw[i * fan_out..(i + 1) * fan_out];
            for (o, &g) in dy_row.iter().enumerate() {
                acc += g * w_row[o];
                dw_row[o] += g * xv;
            }
            dx[bi * fan_in + i] = acc;
        }
    }
    (
        Tensor::from_vec(x.shape(), dx).unwrap(),
        Tensor::from_vec(w.shape(), dw).unwrap(),
        Tensor::from_vec(&[fan_out], db).unwrap(),
    )
}

fn dims4(t: &Tensor) -> (usize, usize, usize, usize) {
    let s = t.shape();
    assert_eq!(s.len(), 4, "expected 4-d tensor, got {s:?}");
    (s[0], s[1], s[2], s[3])
}

fn dims2(t: &Tensor) -> (usize, usize) {
    let s = t.shape();
    assert_eq!(s.len(), 2, "expected 2-d tensor, got {s:?}");
    (s[0], s[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition of 'same'-padded convolution, written independently
    /// of the production kernel.
    fn conv_reference(x: &Tensor, w: &Tensor, bias: &Tensor) -> Vec<f64> {
        let (b, c, h, wid) = dims4(x);
        let (f, _, fh, fw) = dims4(w);
        let mut out = vec![0.0; b * f * h * wid];
        for bi in 0..b {
            for fi in 0..f {
                for oy in 0..h as isize {
                    for ox in 0..wid as isize {
                        let mut acc = bias.data()[fi];
                        for ci in 0..c {
                            for ky in 0..fh as isize {
                                for kx in 0..fw as isize {
                                    let iy = oy + ky - (fh as isize - 1) / 2;
                                    let ix = ox + kx - (fw as isize - 1) / 2;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wid as isize {
                                        continue;
                                    }
                                    acc += x.data()[((bi * c + ci) * h + iy as usize) * wid + ix as usize]
                                        * w.data()[((fi * c + ci) * fh + ky as usize) * fw + kx as usize];
                                }
                            }
                        }
                        out[((bi * f + fi) * h + oy as usize) * wid + ox as usize] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_reference_and_hand_value() {
        let x = Tensor::from_vec(&[1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let w = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0, 0.0, -1.0, 2.0, 0.5, -2.0, 0.0, 1.0, 0.0]).unwrap();
        let bias = Tensor::from_vec(&[1], vec![0.25]).unwrap();
        let y = conv2d(&x, &w, &bias);
        assert_eq!(y.data(), conv_reference(&x, &w, &bias).as_slice());
        // Center output by hand: full 3x3 overlap on the 3x3 input.
        // 1*1 + 0*2 + (-1)*3 + 2*4 + 0.5*5 + (-2)*6 + 0*7 + 1*8 + 0*9 + 0.25
        let center = 1.0 - 3.0 + 8.0 + 2.5 - 12.0 + 8.0 + 0.25;
        assert_eq!(y.data()[4], center);
    }

    #[test]
    fn pool_picks_first_max_on_ties() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![3.0, 3.0, 1.0, 3.0]).unwrap();
        let (y, argmax) = maxpool2(&x);
        assert_eq!(y.data(), &[3.0]);
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn pool_drops_odd_edges() {
        let x = Tensor::from_vec(&[1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let (y, _) = maxpool2(&x);
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[5.0]); // max of the 2x2 window {1,2,4,5}
    }

    #[test]
    fn dense_hand_checked() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 0.0, -1.0, 1.0]).unwrap();
        let w = Tensor::from_vec(&[3, 2], vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![0.5, -0.5]).unwrap();
        let y = dense(&x, &w, &b);
        assert_eq!(y.data(), &[4.5, 4.5, 1.5, -0.5]);
    }
}
