// Partitioned-Gaussian conditioning written out by hand on plain vectors:
// the DFT from cos/sin, the joint covariance of (x_obs, s), and a
// Gauss-Jordan inverse with partial pivoting. Nothing here goes through
// nalgebra decompositions, so it can serve as an independent reference.

#![allow(dead_code)]

use nmf_inpaint::C64;

pub type Mat = Vec<Vec<C64>>;

pub fn dft_synthesis(w: usize, f: usize) -> Mat {
    let s = 1.0 / (f as f64).sqrt();
    (0..w)
        .map(|t| {
            (0..f)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * (t * k) as f64 / f as f64;
                    C64::new(s * a.cos(), s * a.sin())
                })
                .collect()
        })
        .collect()
}

pub fn gauss_jordan_inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p.norm() > 1e-300, "singular oracle matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let factor = m[r][col];
                if factor != C64::new(0.0, 0.0) {
                    let pivot_row = m[col].clone();
                    for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                        *v -= factor * pv;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn adjoint(a: &Mat) -> Mat {
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j].conj()).collect())
        .collect()
}

pub struct OraclePosterior {
    pub mean: Vec<C64>,
    pub cov: Mat,
}

// x_obs = M T s with s ~ CN(0, D):
//   cov(x_obs) = M T D T* M',  cov(s, x_obs) = D T* M'
//   mean = cov(s, x_obs) cov(x_obs)^-1 x_obs
//   cov  = D - cov(s, x_obs) cov(x_obs)^-1 cov(x_obs, s)
pub fn oracle(t: &Mat, d: &[f64], obs: &[usize], x: &[C64]) -> OraclePosterior {
    let f = d.len();
    let dm: Mat = (0..f)
        .map(|i| {
            (0..f)
                .map(|j| C64::new(if i == j { d[i] } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    let t_obs: Mat = obs.iter().map(|&i| t[i].clone()).collect();
    let sigma_sx = matmul(&dm, &adjoint(&t_obs));
    let sigma_xx = matmul(&t_obs, &sigma_sx);
    let gain = matmul(&sigma_sx, &gauss_jordan_inverse(&sigma_xx));
    let mean = gain
        .iter()
        .map(|row| row.iter().zip(x).map(|(g, v)| g * v).sum())
        .collect();
    let reduction = matmul(&gain, &adjoint(&sigma_sx));
    let cov = (0..f)
        .map(|i| (0..f).map(|j| dm[i][j] - reduction[i][j]).collect())
        .collect();
    OraclePosterior { mean, cov }
}
