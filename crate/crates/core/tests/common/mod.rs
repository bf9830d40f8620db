#![allow(dead_code)]

use hotspot_core::inference::{GibbsConfig, GibbsData, GibbsSampler, GibbsSchedule, PriorSpec};

/// `I0(x)` by its power series, summed until terms vanish.
pub fn i0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum, mut k) = (1.0_f64, 1.0_f64, 0.0_f64);
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-18 {
            return sum;
        }
    }
}

pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub struct Micro {
    pub data: GibbsData<f64>,
    pub beta_grid: Vec<f64>,
    pub alpha3_grid: Vec<f64>,
}

/// Two training events, two blocks of three and two kernel points.
pub fn micro_instance() -> Micro {
    let a = [0.5_f64, 1.0, 2.0, 1.5, 0.7];
    Micro {
        data: GibbsData {
            cx: vec![0.0, 1.0, -0.8, 0.4, 1.6],
            cy: vec![0.0, 0.6, 0.9, -0.7, 0.2],
            ct: vec![1.0, 6.0, 13.0, 20.0, 23.0],
            log_a: a.iter().map(|v| v.ln()).collect(),
            block: vec![0, 0, 0, 1, 1],
            block_len: vec![3, 2],
            sx: vec![0.3, 0.9],
            sy: vec![0.2, -0.1],
            st: vec![2.0, 21.5],
            temporal: true,
        },
        beta_grid: vec![0.0, 0.4, 0.8],
        alpha3_grid: vec![0.5, 1.0, 1.5],
    }
}

impl Micro {
    pub fn config(&self) -> GibbsConfig {
        GibbsConfig {
            prior: PriorSpec {
                beta_grid: self.beta_grid.clone(),
                alpha3_grid: self.alpha3_grid.clone(),
            },
            schedule: GibbsSchedule {
                warmup: 0,
                samples: 1,
                chains: 1,
            },
            estimate_weights: true,
            prune_candidates: false,
        }
    }

    /// Exact joint posterior of `(beta1, I_1)` on the 3 x 2 lattice, by
    /// enumerating every discrete coordinate and integrating `alpha1`,
    /// `alpha2` and the weight numerically.
    pub fn brute_force_beta1_block1(&self) -> [[f64; 2]; 3] {
        let d = &self.data;
        let nc = d.cx.len();
        let alpha_integral = |s: f64| simpson(|al: f64| al * al * (-al * al * s / 2.0).exp(), 0.0, 60.0 / s.sqrt(), 20_000);
        let w_integral = |f0: i32, f1: i32| simpson(|w: f64| w.powi(f0) * (1.0 - w).powi(f1), 0.0, 1.0, 2_000);
        let mut out = [[0.0; 2]; 3];
        for (ib1, &b1) in self.beta_grid.iter().enumerate() {
            for &b2 in &self.beta_grid {
                for &b3 in &self.beta_grid {
                    for &a3 in &self.alpha3_grid {
                        for c1 in 0..nc {
                            for c2 in 0..nc {
                                let cs = [c1, c2];
                                let (mut s1, mut s2, mut rest) = (0.0, 0.0, 1.0);
                                let mut f = [0, 0];
                                for (l, &c) in cs.iter().enumerate() {
                                    let la = d.log_a[c];
                                    let av = la.exp();
                                    s1 += (d.sx[l] - d.cx[c]).powi(2) * av.powf(2.0 * b1);
                                    s2 += (d.sy[l] - d.cy[c]).powi(2) * av.powf(2.0 * b2);
                                    let tau = a3 * a3 * av.powf(2.0 * b3);
                                    let gap = (d.st[l] - d.ct[c]) * std::f64::consts::PI / 12.0;
                                    let k = d.block[c] as usize;
                                    rest *= av.powf(b1) * av.powf(b2) * (tau * gap.cos()).exp()
                                        / (24.0 * i0_series(tau))
                                        / d.block_len[k] as f64;
                                    f[k] += 1;
                                }
                                let p = rest * alpha_integral(s1) * alpha_integral(s2) * w_integral(f[0], f[1]);
                                out[ib1][d.block[c1] as usize] += p;
                            }
                        }
                    }
                }
            }
        }
        let total: f64 = out.iter().flatten().sum();
        out.iter_mut().flatten().for_each(|v| *v /= total);
        out
    }

    /// Empirical joint frequencies of `(beta1, I_1)` over `sweeps` Gibbs sweeps.
    pub fn gibbs_beta1_block1(&self, sweeps: usize, seed: u64) -> [[f64; 2]; 3] {
        let cfg = self.config();
        let mut s = GibbsSampler::new(&self.data, &cfg, seed, 0).unwrap();
        let mut counts = [[0usize; 2]; 3];
        for _ in 0..1000 {
            s.sweep().unwrap();
        }
        for _ in 0..sweeps {
            s.sweep().unwrap();
            let st = s.state();
            let ib = self.beta_grid.iter().position(|&b| b == st.params.beta1).unwrap();
            let k = self.data.block[st.aug.assignment[0] as usize] as usize;
            counts[ib][k] += 1;
        }
        let mut out = [[0.0; 2]; 3];
        for i in 0..3 {
            for k in 0..2 {
                out[i][k] = counts[i][k] as f64 / sweeps as f64;
            }
        }
        out
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}
