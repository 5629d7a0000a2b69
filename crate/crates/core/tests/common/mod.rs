//! Classical reference computations used as oracles by the integration
//! tests. Nothing here calls into the library's synthesis code.

#![allow(dead_code)]

/// Shannon entropy in bits.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

pub fn bsc(out: usize, inp: usize, e: f64) -> f64 {
    if out == inp {
        1.0 - e
    } else {
        e
    }
}

/// Rows of `G_N = B_N F^{⊗n}` with `F = [[1,0],[1,1]]`: row `i` of `F^{⊗n}`
/// is the indicator of the bitwise subsets of `i`.
pub fn generator(n: usize) -> Vec<Vec<u8>> {
    let bits = n.trailing_zeros();
    let rev = |i: usize| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) };
    (0..n)
        .map(|i| {
            let r = rev(i);
            (0..n).map(|j| u8::from(j & !r == 0)).collect()
        })
        .collect()
}

pub fn encode(u: &[u8], g: &[Vec<u8>]) -> Vec<u8> {
    let mut x = vec![0u8; u.len()];
    for (row, &bit) in g.iter().zip(u) {
        if bit == 1 {
            for (xj, gj) in x.iter_mut().zip(row) {
                *xj ^= gj;
            }
        }
    }
    x
}

/// Bits of `v` as a length-`n` vector, most significant first.
pub fn bits_of(v: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((v >> (n - 1 - i)) & 1) as u8).collect()
}

/// `(I(U_k; Y^N U^{k−1}), Z)` for every `k`, by exhaustive enumeration over
/// uniform `u`. Use `t` maps input `x` to the distribution `per_use[t][x]`.
pub fn polar_oracle(per_use: &[[Vec<f64>; 2]]) -> Vec<(f64, f64)> {
    let n = per_use.len();
    let g = generator(n);
    let table: Vec<Vec<f64>> = (0..1usize << n)
        .map(|u| {
            let x = encode(&bits_of(u, n), &g);
            x.iter()
                .enumerate()
                .fold(vec![1.0], |acc, (t, &xt)| kron(&acc, &per_use[t][xt as usize]))
        })
        .collect();
    let ylen = table[0].len();
    (0..n)
        .map(|k| {
            let half = 1usize << (n - k - 1);
            let w = 1.0 / (1usize << k) as f64;
            let avg = |start: usize| {
                let mut acc = vec![0.0; ylen];
                for row in &table[start..start + half] {
                    for (a, r) in acc.iter_mut().zip(row) {
                        *a += r;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= half as f64);
                acc
            };
            let (mut info, mut z) = (0.0, 0.0);
            for ctx in 0..1usize << k {
                let base = ctx << (n - k);
                let (p0, p1) = (avg(base), avg(base + half));
                let mix: Vec<f64> = p0.iter().zip(&p1).map(|(a, b)| 0.5 * (a + b)).collect();
                info += w * (entropy(&mix) - 0.5 * entropy(&p0) - 0.5 * entropy(&p1));
                z += w * p0.iter().zip(&p1).map(|(a, b)| (a * b).sqrt()).sum::<f64>();
            }
            (info, z)
        })
        .collect()
}

pub fn polar_oracle_iid(w: &[Vec<f64>; 2], n: usize) -> Vec<(f64, f64)> {
    polar_oracle(&vec![w.clone(); n])
}

/// First-sender rate of `0^i 1^N 0^{N−i}` for `i = 0..=N` on a classical
/// MAC `w[x][y]`. The first `i` bits of `X` see the channel with `Y`
/// averaged out; the remaining ones see `Y` as side information.
pub fn nu_rates_oracle(w: &[[Vec<f64>; 2]; 2], n: usize) -> Vec<f64> {
    let avg = |x: usize| -> Vec<f64> { w[x][0].iter().zip(&w[x][1]).map(|(a, b)| 0.5 * (a + b)).collect() };
    let blind: Vec<f64> = polar_oracle_iid(&[avg(0), avg(1)], n).into_iter().map(|p| p.0).collect();
    let mut informed = vec![0.0; n];
    for ys in 0..1usize << n {
        let y = bits_of(ys, n);
        let per_use: Vec<[Vec<f64>; 2]> = y.iter().map(|&yt| [w[0][yt as usize].clone(), w[1][yt as usize].clone()]).collect();
        for (acc, (i, _)) in informed.iter_mut().zip(polar_oracle(&per_use)) {
            *acc += i / (1usize << n) as f64;
        }
    }
    (0..=n)
        .map(|i| (blind[..i].iter().sum::<f64>() + informed[i..].iter().sum::<f64>()) / n as f64)
        .collect()
}

/// Pooled two-proportion z statistic.
pub fn two_proportion_z(e1: u64, n1: u64, e2: u64, n2: u64) -> f64 {
    let (p1, p2) = (e1 as f64 / n1 as f64, e2 as f64 / n2 as f64);
    let p = (e1 + e2) as f64 / (n1 + n2) as f64;
    let var = p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var == 0.0 {
        0.0
    } else {
        (p1 - p2) / var.sqrt()
    }
}
