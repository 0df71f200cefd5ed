//! Tensor operations and their backward rules.
//!
//! Broadcasting is deliberately narrow: a binary op accepts identical
//! shapes, a `[cols]` bias against a `[rows, cols]` matrix, or a
//! `[rows, 1]` column against a `[rows, cols]` matrix. That is exactly what
//! the models need; anything else is a shape error.

use super::{AutogradError, Tensor};
use crate::scalar::{real, Real};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Bias, // rhs [c] against lhs [r, c]
    Col,  // rhs [r, 1] against lhs [r, c]
}

fn broadcast_kind(a: &[usize], b: &[usize]) -> Result<Broadcast, AutogradError> {
    if a == b {
        return Ok(Broadcast::Same);
    }
    if a.len() == 2 && b.len() == 1 && b[0] == a[1] {
        return Ok(Broadcast::Bias);
    }
    if a.len() == 2 && b.len() == 2 && b[0] == a[0] && b[1] == 1 {
        return Ok(Broadcast::Col);
    }
    Err(AutogradError::ShapeMismatch(format!(
        "cannot broadcast {b:?} against {a:?}"
    )))
}

#[inline]
fn rhs_index(kind: Broadcast, i: usize, cols: usize) -> usize {
    match kind {
        Broadcast::Same => i,
        Broadcast::Bias => i % cols,
        Broadcast::Col => i / cols,
    }
}

impl<F: Real> Tensor<F> {
    fn binary(
        &self,
        rhs: &Tensor<F>,
        fwd: impl Fn(F, F) -> F,
        dfa: impl Fn(F, F) -> F + 'static,
        dfb: impl Fn(F, F) -> F + 'static,
    ) -> Result<Tensor<F>, AutogradError> {
        let (a_shape, b_shape) = (self.shape(), rhs.shape());
        let kind = broadcast_kind(&a_shape, &b_shape)?;
        let cols = if a_shape.len() == 2 { a_shape[1] } else { 1 };
        let a_vals = self.values();
        let b_vals = rhs.values();

        let out: Vec<F> = a_vals
            .iter()
            .enumerate()
            .map(|(i, &a)| fwd(a, b_vals[rhs_index(kind, i, cols)]))
            .collect();

        let (need_a, need_b) = (self.needs_grad(), rhs.needs_grad());
        let b_len = b_vals.len();
        let back = move |g: &[F]| {
            let da = need_a.then(|| {
                g.iter()
                    .enumerate()
                    .map(|(i, &gi)| gi * dfa(a_vals[i], b_vals[rhs_index(kind, i, cols)]))
                    .collect()
            });
            let db = need_b.then(|| {
                let mut acc = vec![F::zero(); b_len];
                for (i, &gi) in g.iter().enumerate() {
                    let bi = rhs_index(kind, i, cols);
                    acc[bi] += gi * dfb(a_vals[i], b_vals[bi]);
                }
                acc
            });
            vec![da, db]
        };
        Ok(Tensor::from_op(
            out,
            a_shape,
            vec![self.clone(), rhs.clone()],
            Box::new(back),
        ))
    }

    pub fn add(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        self.binary(rhs, |a, b| a + b, |_, _| F::one(), |_, _| F::one())
    }

    pub fn sub(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        self.binary(rhs, |a, b| a - b, |_, _| F::one(), |_, _| -F::one())
    }

    pub fn mul(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        self.binary(rhs, |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn div(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        self.binary(rhs, |a, b| a / b, |_, b| F::one() / b, |a, b| -a / (b * b))
    }

    fn unary(&self, fwd: impl Fn(F) -> F, dfdx: impl Fn(F) -> F + 'static) -> Tensor<F> {
        let x_vals = self.values();
        let out: Vec<F> = x_vals.iter().map(|&v| fwd(v)).collect();
        let need = self.needs_grad();
        let back = move |g: &[F]| {
            let dx = need.then(|| {
                g.iter()
                    .zip(x_vals.iter())
                    .map(|(&gi, &xi)| gi * dfdx(xi))
                    .collect()
            });
            vec![dx]
        };
        Tensor::from_op(out, self.shape(), vec![self.clone()], Box::new(back))
    }

    pub fn neg(&self) -> Tensor<F> {
        self.unary(|v| -v, |_| -F::one())
    }

    pub fn scale(&self, c: F) -> Tensor<F> {
        self.unary(move |v| v * c, move |_| c)
    }

    pub fn add_scalar(&self, c: F) -> Tensor<F> {
        self.unary(move |v| v + c, |_| F::one())
    }

    pub fn relu(&self) -> Tensor<F> {
        self.unary(
            |v| if v > F::zero() { v } else { F::zero() },
            |v| if v > F::zero() { F::one() } else { F::zero() },
        )
    }

    pub fn leaky_relu(&self, alpha: F) -> Tensor<F> {
        self.unary(
            move |v| if v > F::zero() { v } else { v * alpha },
            move |v| if v > F::zero() { F::one() } else { alpha },
        )
    }

    pub fn tanh(&self) -> Tensor<F> {
        self.unary(
            |v| v.tanh(),
            |v| {
                let t = v.tanh();
                F::one() - t * t
            },
        )
    }

    pub fn sigmoid(&self) -> Tensor<F> {
        self.unary(
            |v| F::one() / (F::one() + (-v).exp()),
            |v| {
                let s = F::one() / (F::one() + (-v).exp());
                s * (F::one() - s)
            },
        )
    }

    /// Elementwise square root. Callers guard the argument away from zero
    /// (see `clamp_min`), where the derivative blows up.
    pub fn sqrt(&self) -> Tensor<F> {
        self.unary(
            |v| v.sqrt(),
            |v| {
                let half = real::<F>(0.5);
                half / v.sqrt()
            },
        )
    }

    /// `max(x, c)` with subgradient 0 at and below the clamp.
    pub fn clamp_min(&self, c: F) -> Tensor<F> {
        self.unary(
            move |v| v.max(c),
            move |v| if v > c { F::one() } else { F::zero() },
        )
    }

    /// Matrix product `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        let (a_shape, b_shape) = (self.shape(), rhs.shape());
        if a_shape.len() != 2 || b_shape.len() != 2 || a_shape[1] != b_shape[0] {
            return Err(AutogradError::ShapeMismatch(format!(
                "matmul {a_shape:?} x {b_shape:?}"
            )));
        }
        let (m, k, n) = (a_shape[0], a_shape[1], b_shape[1]);
        let a_vals = self.values();
        let b_vals = rhs.values();

        let mut out = vec![F::zero(); m * n];
        for i in 0..m {
            for kk in 0..k {
                let a = a_vals[i * k + kk];
                if a == F::zero() {
                    continue;
                }
                let b_row = &b_vals[kk * n..(kk + 1) * n];
                let o_row = &mut out[i * n..(i + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }

        let (need_a, need_b) = (self.needs_grad(), rhs.needs_grad());
        let back = move |g: &[F]| {
            let da = need_a.then(|| {
                // dA = G . B^T
                let mut da = vec![F::zero(); m * k];
                for i in 0..m {
                    for kk in 0..k {
                        let mut acc = F::zero();
                        let g_row = &g[i * n..(i + 1) * n];
                        let b_row = &b_vals[kk * n..(kk + 1) * n];
                        for (&gi, &bi) in g_row.iter().zip(b_row.iter()) {
                            acc += gi * bi;
                        }
                        da[i * k + kk] = acc;
                    }
                }
                da
            });
            let db = need_b.then(|| {
                // dB = A^T . G
                let mut db = vec![F::zero(); k * n];
                for i in 0..m {
                    let g_row = &g[i * n..(i + 1) * n];
                    for kk in 0..k {
                        let a = a_vals[i * k + kk];
                        if a == F::zero() {
                            continue;
                        }
                        let db_row = &mut db[kk * n..(kk + 1) * n];
                        for (d, &gi) in db_row.iter_mut().zip(g_row.iter()) {
                            *d += a * gi;
                        }
                    }
                }
                db
            });
            vec![da, db]
        };
        Ok(Tensor::from_op(
            out,
            vec![m, n],
            vec![self.clone(), rhs.clone()],
            Box::new(back),
        ))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&self) -> Tensor<F> {
        let n = self.numel();
        let total = self.with_values(|v| v.iter().fold(F::zero(), |a, &x| a + x));
        let need = self.needs_grad();
        let back = move |g: &[F]| vec![need.then(|| vec![g[0]; n])];
        Tensor::from_op(vec![total], vec![1], vec![self.clone()], Box::new(back))
    }

    /// Mean of all elements, as a `[1]` tensor.
    pub fn mean(&self) -> Tensor<F> {
        let n = self.numel();
        self.sum().scale(real::<F>(1.0 / n as f64))
    }

    /// Row sums of a `[r, c]` matrix, keeping the axis: result is `[r, 1]`.
    pub fn row_sum(&self) -> Result<Tensor<F>, AutogradError> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(AutogradError::ShapeMismatch(format!(
                "row_sum needs a matrix, got {shape:?}"
            )));
        }
        let (r, c) = (shape[0], shape[1]);
        let out: Vec<F> = self.with_values(|v| {
            (0..r)
                .map(|i| v[i * c..(i + 1) * c].iter().fold(F::zero(), |a, &x| a + x))
                .collect()
        });
        let need = self.needs_grad();
        let back = move |g: &[F]| {
            let dx = need.then(|| {
                let mut dx = vec![F::zero(); r * c];
                for i in 0..r {
                    for j in 0..c {
                        dx[i * c + j] = g[i];
                    }
                }
                dx
            });
            vec![dx]
        };
        Ok(Tensor::from_op(
            out,
            vec![r, 1],
            vec![self.clone()],
            Box::new(back),
        ))
    }

    /// Matrix transpose.
    pub fn transpose2d(&self) -> Result<Tensor<F>, AutogradError> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(AutogradError::ShapeMismatch(format!(
                "transpose2d needs a matrix, got {shape:?}"
            )));
        }
        let (r, c) = (shape[0], shape[1]);
        let vals = self.values();
        let mut out = vec![F::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = vals[i * c + j];
            }
        }
        let need = self.needs_grad();
        let back = move |g: &[F]| {
            let dx = need.then(|| {
                let mut dx = vec![F::zero(); r * c];
                for j in 0..c {
                    for i in 0..r {
                        dx[i * c + j] = g[j * r + i];
                    }
                }
                dx
            });
            vec![dx]
        };
        Ok(Tensor::from_op(
            out,
            vec![c, r],
            vec![self.clone()],
            Box::new(back),
        ))
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<F>, AutogradError> {
        if new_shape.iter().product::<usize>() != self.numel() {
            return Err(AutogradError::ShapeMismatch(format!(
                "reshape {:?} -> {new_shape:?}",
                self.shape()
            )));
        }
        let need = self.needs_grad();
        let back = move |g: &[F]| vec![need.then(|| g.to_vec())];
        Ok(Tensor::from_op(
            self.values(),
            new_shape.to_vec(),
            vec![self.clone()],
            Box::new(back),
        ))
    }

    /// Softmax along `axis` of a matrix; each slice sums to one.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<F>, AutogradError> {
        let shape = self.shape();
        if shape.len() != 2 || axis > 1 {
            return Err(AutogradError::ShapeMismatch(format!(
                "softmax axis {axis} on shape {shape:?}"
            )));
        }
        let (r, c) = (shape[0], shape[1]);
        let vals = self.values();
        let mut out = vec![F::zero(); r * c];
        let (n_slices, slice_len, stride, step) = if axis == 1 {
            (r, c, c, 1)
        } else {
            (c, r, 1, c)
        };
        for s in 0..n_slices {
            let base = s * stride;
            let mut max = F::neg_infinity();
            for i in 0..slice_len {
                max = max.max(vals[base + i * step]);
            }
            let mut total = F::zero();
            for i in 0..slice_len {
                let e = (vals[base + i * step] - max).exp();
                out[base + i * step] = e;
                total += e;
            }
            for i in 0..slice_len {
                out[base + i * step] /= total;
            }
        }

        let need = self.needs_grad();
        let y = out.clone();
        let back = move |g: &[F]| {
            let dx = need.then(|| {
                let mut dx = vec![F::zero(); y.len()];
                for s in 0..n_slices {
                    let base = s * stride;
                    let mut dot = F::zero();
                    for i in 0..slice_len {
                        let idx = base + i * step;
                        dot += g[idx] * y[idx];
                    }
                    for i in 0..slice_len {
                        let idx = base + i * step;
                        dx[idx] = y[idx] * (g[idx] - dot);
                    }
                }
                dx
            });
            vec![dx]
        };
        Ok(Tensor::from_op(out, shape, vec![self.clone()], Box::new(back)))
    }

    /// Mean negative log softmax probability of the true class.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Tensor<F>, AutogradError> {
        let shape = self.shape();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(AutogradError::ShapeMismatch(format!(
                "cross_entropy logits {shape:?} with {} labels",
                labels.len()
            )));
        }
        let (b, c) = (shape[0], shape[1]);
        for &l in labels {
            if l >= c {
                return Err(AutogradError::BadLabel {
                    label: l,
                    classes: c,
                });
            }
        }
        let vals = self.values();
        let mut probs = vec![F::zero(); b * c];
        let mut loss = F::zero();
        for i in 0..b {
            let row = &vals[i * c..(i + 1) * c];
            let max = row.iter().fold(F::neg_infinity(), |a, &v| a.max(v));
            let mut total = F::zero();
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                probs[i * c + j] = e;
                total += e;
            }
            for j in 0..c {
                probs[i * c + j] /= total;
            }
            loss += total.ln() + max - row[labels[i]];
        }
        loss /= real::<F>(b as f64);

        let need = self.needs_grad();
        let labels = labels.to_vec();
        let back = move |g: &[F]| {
            let dx = need.then(|| {
                let inv_b = real::<F>(1.0 / b as f64);
                let mut dx = probs.clone();
                for (i, &l) in labels.iter().enumerate() {
                    dx[i * c + l] -= F::one();
                }
                for d in dx.iter_mut() {
                    *d = *d * g[0] * inv_b;
                }
                dx
            });
            vec![dx]
        };
        Ok(Tensor::from_op(
            vec![loss],
            vec![1],
            vec![self.clone()],
            Box::new(back),
        ))
    }
}

/// Concatenates tensors along `axis`; all other dimensions must match.
pub fn concat<F: Real>(xs: &[Tensor<F>], axis: usize) -> Result<Tensor<F>, AutogradError> {
    assert!(!xs.is_empty(), "concat of nothing");
    let first = xs[0].shape();
    if axis >= first.len() {
        return Err(AutogradError::ShapeMismatch(format!(
            "concat axis {axis} on shape {first:?}"
        )));
    }
    let mut axis_lens = Vec::with_capacity(xs.len());
    for x in xs {
        let s = x.shape();
        if s.len() != first.len()
            || s.iter()
                .zip(first.iter())
                .enumerate()
                .any(|(d, (a, b))| d != axis && a != b)
        {
            return Err(AutogradError::ShapeMismatch(format!(
                "concat {s:?} with {first:?}"
            )));
        }
        axis_lens.push(s[axis]);
    }
    let outer: usize = first[..axis].iter().product();
    let inner: usize = first[axis + 1..].iter().product();
    let total_axis: usize = axis_lens.iter().sum();

    let mut out_shape = first.clone();
    out_shape[axis] = total_axis;
    let mut out = vec![F::zero(); outer * total_axis * inner];
    let sources: Vec<Vec<F>> = xs.iter().map(Tensor::values).collect();
    for o in 0..outer {
        let mut offset = 0;
        for (src, &alen) in sources.iter().zip(axis_lens.iter()) {
            let block = alen * inner;
            let dst_base = o * total_axis * inner + offset * inner;
            let src_base = o * block;
            out[dst_base..dst_base + block].copy_from_slice(&src[src_base..src_base + block]);
            offset += alen;
        }
    }

    let needs: Vec<bool> = xs.iter().map(Tensor::needs_grad).collect();
    let lens = axis_lens.clone();
    let back = move |g: &[F]| {
        let mut contribs: Vec<Option<Vec<F>>> = needs
            .iter()
            .zip(lens.iter())
            .map(|(&n, &alen)| n.then(|| vec![F::zero(); outer * alen * inner]))
            .collect();
        for o in 0..outer {
            let mut offset = 0;
            for (ci, &alen) in lens.iter().enumerate() {
                let block = alen * inner;
                if let Some(c) = contribs[ci].as_mut() {
                    let src_base = o * total_axis * inner + offset * inner;
                    let dst_base = o * block;
                    c[dst_base..dst_base + block]
                        .copy_from_slice(&g[src_base..src_base + block]);
                }
                offset += alen;
            }
        }
        contribs
    };
    Ok(Tensor::from_op(out, out_shape, xs.to_vec(), Box::new(back)))
}

// --- convolution kernels -------------------------------------------------

#[inline]
fn out_range(s: usize, p: usize, tap: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    // Output positions o with 0 <= o*s + tap - p < in_len.
    let lo = if tap >= p { 0 } else { (p - tap).div_ceil(s) };
    let hi = if in_len + p > tap {
        ((in_len + p - tap - 1) / s + 1).min(out_len)
    } else {
        0
    };
    (lo, hi.max(lo))
}

/// `out[n, co, oi, oj] = sum_{ci,u,v} input[n, ci, oi*s+u-p, oj*s+v-p] * kernel[co, ci, u, v]`
fn gather<F: Real>(
    input: &[F],
    (n, cin, ih, iw): (usize, usize, usize, usize),
    kernel: &[F],
    (cout, _, kh, kw): (usize, usize, usize, usize),
    s: usize,
    p: usize,
    (oh, ow): (usize, usize),
) -> Vec<F> {
    let mut out = vec![F::zero(); n * cout * oh * ow];
    for bi in 0..n {
        for co in 0..cout {
            let out_plane = (bi * cout + co) * oh * ow;
            for ci in 0..cin {
                let in_plane = (bi * cin + ci) * ih * iw;
                let k_base = (co * cin + ci) * kh * kw;
                for oi in 0..oh {
                    let out_row = out_plane + oi * ow;
                    for u in 0..kh {
                        let ii = (oi * s + u) as isize - p as isize;
                        if ii < 0 || ii >= ih as isize {
                            continue;
                        }
                        let in_row = in_plane + ii as usize * iw;
                        for v in 0..kw {
                            let kv = kernel[k_base + u * kw + v];
                            if kv == F::zero() {
                                continue;
                            }
                            let (lo, hi) = out_range(s, p, v, iw, ow);
                            for oj in lo..hi {
                                let jj = oj * s + v - p;
                                out[out_row + oj] += kv * input[in_row + jj];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `out[n, cb, i*s+u-p, j*s+v-p] += input[n, ca, i, j] * kernel[ca, cb, u, v]`
fn scatter<F: Real>(
    input: &[F],
    (n, ca, ih, iw): (usize, usize, usize, usize),
    kernel: &[F],
    (_, cb, kh, kw): (usize, usize, usize, usize),
    s: usize,
    p: usize,
    (oh, ow): (usize, usize),
) -> Vec<F> {
    let mut out = vec![F::zero(); n * cb * oh * ow];
    for bi in 0..n {
        for a in 0..ca {
            let in_plane = (bi * ca + a) * ih * iw;
            for b in 0..cb {
                let out_plane = (bi * cb + b) * oh * ow;
                let k_base = (a * cb + b) * kh * kw;
                for i in 0..ih {
                    let in_row = in_plane + i * iw;
                    for u in 0..kh {
                        let oi = (i * s + u) as isize - p as isize;
                        if oi < 0 || oi >= oh as isize {
                            continue;
                        }
                        let out_row = out_plane + oi as usize * ow;
                        for v in 0..kw {
                            let kv = kernel[k_base + u * kw + v];
                            if kv == F::zero() {
                                continue;
                            }
                            let (lo, hi) = out_range(s, p, v, ow, iw);
                            for j in lo..hi {
                                let oj = j * s + v - p;
                                out[out_row + oj] += kv * input[in_row + j];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `dk[ca, cb, u, v] = sum_{n,i,j} a[n, ca, i, j] * b[n, cb, i*s+u-p, j*s+v-p]`
fn kernel_grad<F: Real>(
    a: &[F],
    (n, ca, ha, wa): (usize, usize, usize, usize),
    b: &[F],
    (_, cb, hb, wb): (usize, usize, usize, usize),
    s: usize,
    p: usize,
    (kh, kw): (usize, usize),
) -> Vec<F> {
    let mut dk = vec![F::zero(); ca * cb * kh * kw];
    for bi in 0..n {
        for ia in 0..ca {
            let a_plane = (bi * ca + ia) * ha * wa;
            for ib in 0..cb {
                let b_plane = (bi * cb + ib) * hb * wb;
                let k_base = (ia * cb + ib) * kh * kw;
                for u in 0..kh {
                    for i in 0..ha {
                        let ii = (i * s + u) as isize - p as isize;
                        if ii < 0 || ii >= hb as isize {
                            continue;
                        }
                        let a_row = a_plane + i * wa;
                        let b_row = b_plane + ii as usize * wb;
                        for v in 0..kw {
                            let (lo, hi) = out_range(s, p, v, wb, wa);
                            let mut acc = F::zero();
                            for j in lo..hi {
                                acc += a[a_row + j] * b[b_row + j * s + v - p];
                            }
                            dk[k_base + u * kw + v] += acc;
                        }
                    }
                }
            }
        }
    }
    dk
}

fn dims4(shape: &[usize]) -> Result<(usize, usize, usize, usize), AutogradError> {
    if shape.len() != 4 {
        return Err(AutogradError::ShapeMismatch(format!(
            "expected 4-D tensor, got {shape:?}"
        )));
    }
    Ok((shape[0], shape[1], shape[2], shape[3]))
}

/// 2-D cross-correlation with zero padding.
/// `x: [n, c_in, h, w]`, `kernel: [c_out, c_in, kh, kw]`.
pub fn conv2d<F: Real>(
    x: &Tensor<F>,
    kernel: &Tensor<F>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<F>, AutogradError> {
    assert!(stride > 0, "stride must be positive");
    let xd = dims4(&x.shape())?;
    let kd = dims4(&kernel.shape())?;
    let (n, cin, h, w) = xd;
    let (cout, kcin, kh, kw) = kd;
    if kcin != cin || kh > h + 2 * padding || kw > w + 2 * padding {
        return Err(AutogradError::ShapeMismatch(format!(
            "conv2d x {:?} kernel {:?} stride {stride} pad {padding}",
            x.shape(),
            kernel.shape()
        )));
    }
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;

    let x_vals = x.values();
    let k_vals = kernel.values();
    let out = gather(&x_vals, xd, &k_vals, kd, stride, padding, (oh, ow));

    let (need_x, need_k) = (x.needs_grad(), kernel.needs_grad());
    let back = move |g: &[F]| {
        let gd = (n, cout, oh, ow);
        let dx = need_x.then(|| scatter(g, gd, &k_vals, (cout, cin, kh, kw), stride, padding, (h, w)));
        let dk = need_k.then(|| kernel_grad(g, gd, &x_vals, xd, stride, padding, (kh, kw)));
        vec![dx, dk]
    };
    Ok(Tensor::from_op(
        out,
        vec![n, cout, oh, ow],
        vec![x.clone(), kernel.clone()],
        Box::new(back),
    ))
}

/// Transposed convolution (the adjoint of [`conv2d`] with the same kernel).
/// `x: [n, c_in, h, w]`, `kernel: [c_in, c_out, kh, kw]`; spatial output is
/// `(h - 1) * stride - 2 * padding + kh`.
pub fn conv2d_transpose<F: Real>(
    x: &Tensor<F>,
    kernel: &Tensor<F>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<F>, AutogradError> {
    assert!(stride > 0, "stride must be positive");
    let xd = dims4(&x.shape())?;
    let kd = dims4(&kernel.shape())?;
    let (n, cin, h, w) = xd;
    let (kcin, cout, kh, kw) = kd;
    let oh = (h - 1) * stride + kh;
    let ow = (w - 1) * stride + kw;
    if kcin != cin || oh < 2 * padding + 1 || ow < 2 * padding + 1 {
        return Err(AutogradError::ShapeMismatch(format!(
            "conv2d_transpose x {:?} kernel {:?} stride {stride} pad {padding}",
            x.shape(),
            kernel.shape()
        )));
    }
    let (oh, ow) = (oh - 2 * padding, ow - 2 * padding);

    let x_vals = x.values();
    let k_vals = kernel.values();
    let out = scatter(&x_vals, xd, &k_vals, kd, stride, padding, (oh, ow));

    let (need_x, need_k) = (x.needs_grad(), kernel.needs_grad());
    let back = move |g: &[F]| {
        let gd = (n, cout, oh, ow);
        let dx = need_x.then(|| gather(g, gd, &k_vals, (cin, cout, kh, kw), stride, padding, (h, w)));
        let dk = need_k.then(|| kernel_grad(&x_vals, xd, g, gd, stride, padding, (kh, kw)));
        vec![dx, dk]
    };
    Ok(Tensor::from_op(
        out,
        vec![n, cout, oh, ow],
        vec![x.clone(), kernel.clone()],
        Box::new(back),
    ))
}

/// Adds a per-channel bias to a `[n, c, h, w]` tensor.
pub fn add_channel_bias<F: Real>(
    x: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<Tensor<F>, AutogradError> {
    let (n, c, h, w) = dims4(&x.shape())?;
    if bias.shape() != vec![c] {
        return Err(AutogradError::ShapeMismatch(format!(
            "channel bias {:?} on {:?}",
            bias.shape(),
            x.shape()
        )));
    }
    let b_vals = bias.values();
    let hw = h * w;
    let mut out = x.values();
    for bi in 0..n {
        for ci in 0..c {
            let base = (bi * c + ci) * hw;
            let bv = b_vals[ci];
            for o in &mut out[base..base + hw] {
                *o += bv;
            }
        }
    }
    let (need_x, need_b) = (x.needs_grad(), bias.needs_grad());
    let back = move |g: &[F]| {
        let dx = need_x.then(|| g.to_vec());
        let db = need_b.then(|| {
            let mut db = vec![F::zero(); c];
            for bi in 0..n {
                for ci in 0..c {
                    let base = (bi * c + ci) * hw;
                    db[ci] += g[base..base + hw].iter().fold(F::zero(), |a, &v| a + v);
                }
            }
            db
        });
        vec![dx, db]
    };
    Ok(Tensor::from_op(
        out,
        x.shape(),
        vec![x.clone(), bias.clone()],
        Box::new(back),
    ))
}

/// Instance normalization over `[n, c, h, w]`: each (sample, channel) map is
/// standardized (population variance, `eps`-guarded), then scaled by `gamma`
/// and shifted by `beta` (both `[c]`).
pub fn instance_norm<F: Real>(
    x: &Tensor<F>,
    gamma: &Tensor<F>,
    beta: &Tensor<F>,
    eps: F,
) -> Result<Tensor<F>, AutogradError> {
    let (n, c, h, w) = dims4(&x.shape())?;
    let hw = h * w;
    if hw < 2 {
        return Err(AutogradError::ShapeMismatch(
            "instance_norm needs at least 2 spatial positions".into(),
        ));
    }
    if gamma.shape() != vec![c] || beta.shape() != vec![c] {
        return Err(AutogradError::ShapeMismatch(format!(
            "instance_norm affine shapes gamma {:?} beta {:?} for {c} channels",
            gamma.shape(),
            beta.shape()
        )));
    }

    let x_vals = x.values();
    let g_vals = gamma.values();
    let b_vals = beta.values();
    let inv_hw = real::<F>(1.0 / hw as f64);

    let mut x_hat = vec![F::zero(); x_vals.len()];
    let mut sigmas = vec![F::zero(); n * c];
    let mut out = vec![F::zero(); x_vals.len()];
    for bi in 0..n {
        for ci in 0..c {
            let base = (bi * c + ci) * hw;
            let map = &x_vals[base..base + hw];
            let mean = map.iter().fold(F::zero(), |a, &v| a + v) * inv_hw;
            let var = map
                .iter()
                .fold(F::zero(), |a, &v| a + (v - mean) * (v - mean))
                * inv_hw;
            let sigma = (var + eps).sqrt();
            sigmas[bi * c + ci] = sigma;
            for (i, &v) in map.iter().enumerate() {
                let xh = (v - mean) / sigma;
                x_hat[base + i] = xh;
                out[base + i] = g_vals[ci] * xh + b_vals[ci];
            }
        }
    }

    let (need_x, need_g, need_b) = (x.needs_grad(), gamma.needs_grad(), beta.needs_grad());
    let back = move |g: &[F]| {
        let dx = need_x.then(|| {
            let mut dx = vec![F::zero(); g.len()];
            for bi in 0..n {
                for ci in 0..c {
                    let base = (bi * c + ci) * hw;
                    let sigma = sigmas[bi * c + ci];
                    let gm = g_vals[ci];
                    let mut mean_g = F::zero();
                    let mut mean_gx = F::zero();
                    for i in 0..hw {
                        mean_g += g[base + i];
                        mean_gx += g[base + i] * x_hat[base + i];
                    }
                    mean_g *= inv_hw;
                    mean_gx *= inv_hw;
                    for i in 0..hw {
                        dx[base + i] = gm / sigma
                            * (g[base + i] - mean_g - x_hat[base + i] * mean_gx);
                    }
                }
            }
            dx
        });
        let dg = need_g.then(|| {
            let mut dg = vec![F::zero(); c];
            for bi in 0..n {
                for ci in 0..c {
                    let base = (bi * c + ci) * hw;
                    for i in 0..hw {
                        dg[ci] += g[base + i] * x_hat[base + i];
                    }
                }
            }
            dg
        });
        let db = need_b.then(|| {
            let mut db = vec![F::zero(); c];
            for bi in 0..n {
                for ci in 0..c {
                    let base = (bi * c + ci) * hw;
                    db[ci] += g[base..base + hw].iter().fold(F::zero(), |a, &v| a + v);
                }
            }
            db
        });
        vec![dx, dg, db]
    };
    Ok(Tensor::from_op(
        out,
        x.shape(),
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(back),
    ))
}
