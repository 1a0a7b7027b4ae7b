//! Reference computations kept separate from the production code paths they
//! check. Everything here is written for clarity, in `f64`, with no shared
//! kernels.

use crate::model::{Gelu, ModelConfig, NamedTensorStore};

fn tensor(store: &NamedTensorStore, name: &str) -> Vec<f64> {
    store
        .get(name)
        .unwrap_or_else(|| panic!("oracle: missing {name}"))
        .to_vec::<f64>()
}

fn norm_row(x: &[f64], g: &[f64], b: &[f64], eps: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    x.iter()
        .enumerate()
        .map(|(i, v)| (v - mu) / (var + eps).sqrt() * g[i] + b[i])
        .collect()
}

/// `x · W + b` for `W` stored `[in, out]`.
fn affine(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let out = b.len();
    (0..out)
        .map(|j| b[j] + (0..x.len()).map(|i| x[i] * w[i * out + j]).sum::<f64>())
        .collect()
}

fn gelu(x: f64, kind: Gelu) -> f64 {
    match kind {
        Gelu::Tanh => 0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh()),
        Gelu::Erf => 0.5 * x * (1.0 + libm::erf(x / 2f64.sqrt())),
    }
}

/// Position-by-position forward pass. Returns `[T][vocab]` logits.
pub fn naive_forward(store: &NamedTensorStore, cfg: &ModelConfig, tokens: &[u32]) -> Vec<Vec<f64>> {
    let d = cfg.d_model;
    let dh = d / cfg.n_heads;
    let eps = cfg.layer_norm_epsilon;
    let wte = tensor(store, "wte.weight");
    let wpe = tensor(store, "wpe.weight");

    let mut xs: Vec<Vec<f64>> = tokens
        .iter()
        .enumerate()
        .map(|(p, &t)| (0..d).map(|j| wte[t as usize * d + j] + wpe[p * d + j]).collect())
        .collect();

    for l in 0..cfg.n_layers {
        let w = |s: &str| tensor(store, &format!("h.{l}.{s}"));
        let (g1, b1, wqkv, bqkv) = (w("ln_1.weight"), w("ln_1.bias"), w("attn.c_attn.weight"), w("attn.c_attn.bias"));
        let (wo, bo) = (w("attn.c_proj.weight"), w("attn.c_proj.bias"));
        let (g2, b2) = (w("ln_2.weight"), w("ln_2.bias"));
        let (wfc, bfc, wpr, bpr) = (w("mlp.c_fc.weight"), w("mlp.c_fc.bias"), w("mlp.c_proj.weight"), w("mlp.c_proj.bias"));

        let qkv: Vec<Vec<f64>> = xs.iter().map(|x| affine(&norm_row(x, &g1, &b1, eps), &wqkv, &bqkv)).collect();
        let mut attended = vec![vec![0.0; d]; xs.len()];
        for q in 0..xs.len() {
            for h in 0..cfg.n_heads {
                let mut scores = Vec::new();
                for k in 0..=q {
                    let mut s = 0.0;
                    for i in 0..dh {
                        s += qkv[q][h * dh + i] * qkv[k][d + h * dh + i];
                    }
                    scores.push(s / (dh as f64).sqrt());
                }
                let top = scores.iter().cloned().fold(f64::MIN, f64::max);
                let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
                for k in 0..=q {
                    let a = (scores[k] - top).exp() / z;
                    for i in 0..dh {
                        attended[q][h * dh + i] += a * qkv[k][2 * d + h * dh + i];
                    }
                }
            }
        }
        for (x, a) in xs.iter_mut().zip(&attended) {
            let o = affine(a, &wo, &bo);
            x.iter_mut().zip(o).for_each(|(xi, oi)| *xi += oi);
            let hidden: Vec<f64> = affine(&norm_row(x, &g2, &b2, eps), &wfc, &bfc)
                .into_iter()
                .map(|v| gelu(v, cfg.gelu))
                .collect();
            let m = affine(&hidden, &wpr, &bpr);
            x.iter_mut().zip(m).for_each(|(xi, mi)| *xi += mi);
        }
    }

    let (gf, bf) = (tensor(store, "ln_f.weight"), tensor(store, "ln_f.bias"));
    let head = if cfg.tied_output_head { wte } else { tensor(store, "lm_head.weight") };
    xs.iter()
        .map(|x| {
            let h = norm_row(x, &gf, &bf, eps);
            (0..cfg.vocab_size)
                .map(|v| (0..d).map(|j| h[j] * head[v * d + j]).sum())
                .collect()
        })
        .collect()
}

/// Solves `(XᵀX) β = Xᵀy` with an intercept column, by Gauss–Jordan
/// elimination with partial pivoting. Returns `[intercept, β...]`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = x[0].len() + 1;
    let row = |r: usize| std::iter::once(1.0).chain(x[r].iter().copied()).collect::<Vec<f64>>();
    let mut a = vec![vec![0.0; m + 1]; m];
    for r in 0..y.len() {
        let xr = row(r);
        for i in 0..m {
            for j in 0..m {
                a[i][j] += xr[i] * xr[j];
            }
            a[i][m] += xr[i] * y[r];
        }
    }
    for c in 0..m {
        let pivot = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, pivot);
        let div = a[c][c];
        for j in c..=m {
            a[c][j] /= div;
        }
        for i in 0..m {
            if i != c {
                let f = a[i][c];
                for j in c..=m {
                    a[i][j] -= f * a[c][j];
                }
            }
        }
    }
    a.iter().map(|r| r[m]).collect()
}

/// Exact permutation p-value over every assignment of `values` to two groups
/// of the original sizes, using the difference of group means.
pub fn exhaustive_permutation_p(first: &[f64], second: &[f64], two_tailed: bool) -> f64 {
    let all: Vec<f64> = first.iter().chain(second).copied().collect();
    let n = all.len();
    let k = first.len();
    let stat = |mask: u32| {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (i, v) in all.iter().enumerate() {
            if mask & (1 << i) != 0 {
                s1 += v;
            } else {
                s2 += v;
            }
        }
        s1 / k as f64 - s2 / (n - k) as f64
    };
    let observed = stat((1u32 << k) - 1);
    let (mut hits, mut total) = (0usize, 0usize);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        let s = stat(mask);
        let (s, o) = if two_tailed { (s.abs(), observed.abs()) } else { (s, observed) };
        if s >= o - 1e-12 * o.abs().max(1.0) {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Full scan sorted by `(distance, write_step)`: returns write steps and
/// distances of the first `k`.
pub fn scan_nearest(keys: &[(Vec<f64>, usize)], query: &[f64], k: usize, cosine: bool) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = keys
        .iter()
        .map(|(key, step)| {
            let d = if cosine {
                let dot: f64 = key.iter().zip(query).map(|(a, b)| a * b).sum();
                let na = key.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nb = query.iter().map(|b| b * b).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 { 1.0 } else { 1.0 - (dot / (na * nb)).clamp(-1.0, 1.0) }
            } else {
                key.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            };
            (*step, d)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}
