//! 2-D SVD projection of feature matrices and class-centroid separation.
//!
//! Rows are mean-centered (unless [`ProjectionMode::Raw`]) and projected on
//! the two leading right singular vectors. Those come from the eigenvectors
//! of whichever Gram matrix is smaller: `XᵀX` (`p × p`) or `XXᵀ` (`n × n`,
//! mapped back through `Xᵀu / σ`). Each basis vector's largest-magnitude entry
//! is made positive, so the output is unique.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    Centered,
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<ProjectedPoint>,
    pub basis: [Vec<f64>; 2],
    /// Subtracted before projecting; all zeros in raw mode.
    pub mean: Vec<f64>,
    pub singular_values: [f64; 2],
    /// Squared Frobenius norm of the (centered) matrix.
    pub total_variance: f64,
}

impl Projection2D {
    /// `(σ1² + σ2²) / ‖X‖²_F`.
    pub fn captured_fraction(&self) -> f64 {
        let s = &self.singular_values;
        (s[0] * s[0] + s[1] * s[1]) / self.total_variance
    }
}

/// Eigen-decomposition of a symmetric matrix (row-major `n × n`) by
/// Householder reduction to tridiagonal form followed by implicit QL.
/// Returns eigenvalues ascending and eigenvectors as columns of a row-major
/// `n × n` matrix.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| a[i * n..(i + 1) * n].to_vec()).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row][src];
        }
    }
    Ok((values, vectors))
}

fn tridiagonalize(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1]);
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);
            for j in 0..i {
                let f = d[j];
                v[j][i] = f;
                let mut g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let g: f64 = (0..=i).map(|k| v[k][i + 1] * v[k][j]).sum();
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

fn tridiagonal_ql(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > 100 {
                    return Err(Error::InvalidArgument("eigen-decomposition did not converge".into()));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Unit vector orthogonal to unit `v1`, from the coordinate axis where `v1`
/// is smallest.
fn orthogonal_complement(v1: &[f64]) -> Vec<f64> {
    let mut axis = 0;
    for (i, x) in v1.iter().enumerate() {
        if x.abs() < v1[axis].abs() {
            axis = i;
        }
    }
    let mut v: Vec<f64> = v1.iter().map(|x| -v1[axis] * x).collect();
    v[axis] += 1.0;
    normalize(&mut v);
    v
}

pub fn svd_project(m: &FeatureMatrix, mode: ProjectionMode) -> Result<Projection2D> {
    let (n, p) = (m.rows(), m.dim);
    if n < 2 || p < 2 {
        return Err(Error::InvalidArgument(format!(
            "projection needs at least 2 rows and 2 columns, got {n} x {p}"
        )));
    }
    let mut mean = vec![0.0; p];
    if mode == ProjectionMode::Centered {
        for i in 0..n {
            mean.iter_mut().zip(m.row(i)).for_each(|(a, x)| *a += x);
        }
        mean.iter_mut().for_each(|a| *a /= n as f64);
    }
    let x: Vec<f64> = (0..n).flat_map(|i| m.row(i).iter().zip(&mean).map(|(v, mu)| v - mu)).collect();
    let scale = m.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let total_variance: f64 = x.iter().map(|v| v * v).sum();

    let (basis, singular_values) = if p <= n {
        let mut gram = vec![0.0; p * p];
        for i in 0..n {
            let row = &x[i * p..(i + 1) * p];
            for a in 0..p {
                let ra = row[a];
                if ra != 0.0 {
                    for b in a..p {
                        gram[a * p + b] += ra * row[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[a * p + b] = gram[b * p + a];
            }
        }
        let (vals, vecs) = symmetric_eigen(&gram, p)?;
        let column = |c: usize| (0..p).map(|r| vecs[r * p + c]).collect::<Vec<f64>>();
        let s = [vals[p - 1].max(0.0).sqrt(), vals[p - 2].max(0.0).sqrt()];
        let (mut v1, mut v2) = (column(p - 1), column(p - 2));
        normalize(&mut v1);
        normalize(&mut v2);
        ([v1, v2], s)
    } else {
        let mut gram = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let dot: f64 = x[a * p..(a + 1) * p].iter().zip(&x[b * p..(b + 1) * p]).map(|(u, v)| u * v).sum();
                gram[a * n + b] = dot;
                gram[b * n + a] = dot;
            }
        }
        let (vals, vecs) = symmetric_eigen(&gram, n)?;
        let s = [vals[n - 1].max(0.0).sqrt(), vals[n - 2].max(0.0).sqrt()];
        let right = |c: usize, sigma: f64| {
            let mut v = vec![0.0; p];
            for i in 0..n {
                let u = vecs[i * n + c];
                v.iter_mut().zip(&x[i * p..(i + 1) * p]).for_each(|(a, xi)| *a += u * xi);
            }
            v.iter_mut().for_each(|a| *a /= sigma);
            normalize(&mut v);
            v
        };
        if s[0] <= 0.0 {
            return Err(Error::InvalidArgument("matrix has no principal directions".into()));
        }
        let v1 = right(n - 1, s[0]);
        let v2 = if s[1] > 1e-10 * s[0] {
            let mut v2 = right(n - 2, s[1]);
            let d: f64 = v1.iter().zip(&v2).map(|(a, b)| a * b).sum();
            v2.iter_mut().zip(&v1).for_each(|(b, a)| *b -= d * a);
            normalize(&mut v2);
            v2
        } else {
            orthogonal_complement(&v1)
        };
        ([v1, v2], s)
    };

    if singular_values[0] <= 1e-12 * scale * ((n * p) as f64).sqrt() || singular_values[0] == 0.0 {
        return Err(Error::InvalidArgument("matrix has no principal directions".into()));
    }
    let mut basis = basis;
    fix_sign(&mut basis[0]);
    fix_sign(&mut basis[1]);

    let points = (0..n)
        .map(|i| {
            let row = &x[i * p..(i + 1) * p];
            let dot = |v: &[f64]| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            ProjectedPoint {
                x: dot(&basis[0]),
                y: dot(&basis[1]),
                label: m.labels[i],
            }
        })
        .collect();
    Ok(Projection2D {
        points,
        basis,
        mean,
        singular_values,
        total_variance,
    })
}

fn class_means_2d(points: &[ProjectedPoint]) -> Result<[[f64; 2]; 2]> {
    let mut sums = [[0.0; 2]; 2];
    let mut counts = [0usize; 2];
    for pt in points {
        let c = pt.label.index();
        sums[c][0] += pt.x;
        sums[c][1] += pt.y;
        counts[c] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::SingleClass("projection".into()));
    }
    Ok([0, 1].map(|c| [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64]))
}

/// Euclidean distance between the two class centroids of the projected points.
pub fn centroid_distance(proj: &Projection2D) -> Result<f64> {
    let [a, b] = class_means_2d(&proj.points)?;
    Ok((a[0] - b[0]).hypot(a[1] - b[1]))
}

/// The same distance measured in the full feature space.
pub fn centroid_distance_full(m: &FeatureMatrix) -> Result<f64> {
    let stats = crate::features::feature_stats(m)?;
    match &stats.centroids {
        [Some(a), Some(b)] => Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()),
        _ => Err(Error::SingleClass("feature matrix".into())),
    }
}

/// Relative change of the centroid distance, in percent.
pub fn separation_change(d_base: f64, d_aug: f64) -> Result<f64> {
    if d_base.is_nan() || d_base <= 0.0 {
        return Err(Error::InvalidArgument(format!("baseline distance must be positive, got {d_base}")));
    }
    Ok((d_aug - d_base) / d_base * 100.0)
}

pub const SVG_WIDTH: f64 = 800.0;
pub const SVG_HEIGHT: f64 = 400.0;

fn color(label: Label) -> &'static str {
    match label {
        Label::NonDeceptive => "blue",
        Label::Deceptive => "red",
    }
}

pub fn scatter_csv(proj: &Projection2D) -> String {
    let mut out = String::from("x,y,label\n");
    for pt in &proj.points {
        let _ = writeln!(out, "{},{},{}", pt.x, pt.y, pt.label.index());
    }
    out
}

/// 800×400 SVG: non-deceptive points blue, deceptive red, legend on the right.
pub fn scatter_svg(proj: &Projection2D, title: &str) -> String {
    let (x0, x1, y0, y1) = (40.0, 620.0, 40.0, 370.0);
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for pt in &proj.points {
        xmin = xmin.min(pt.x);
        xmax = xmax.max(pt.x);
        ymin = ymin.min(pt.y);
        ymax = ymax.max(pt.y);
    }
    let span = |lo: f64, hi: f64| if hi - lo > 0.0 { hi - lo } else { 1.0 };
    let (sx, sy) = ((x1 - x0) / span(xmin, xmax), (y1 - y0) / span(ymin, ymax));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{x0}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape_xml(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="gray"/>"#,
        x1 - x0,
        y1 - y0
    );
    for pt in &proj.points {
        let cx = x0 + (pt.x - xmin) * sx;
        let cy = y1 - (pt.y - ymin) * sy;
        let _ = writeln!(
            svg,
            r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="3" fill="{}" fill-opacity="0.7"/>"#,
            color(pt.label)
        );
    }
    for (i, label) in [Label::NonDeceptive, Label::Deceptive].into_iter().enumerate() {
        let y = 60.0 + 24.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="650" y="{}" width="10" height="10" fill="{}"/><text x="668" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            y - 9.0,
            color(label),
            y,
            label.as_str()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<stem>.csv` and `<stem>.svg`.
pub fn emit_scatter(proj: &Projection2D, stem: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    if proj.points.is_empty() {
        return Err(Error::Empty("projection has no points".into()));
    }
    let stem = stem.as_ref();
    let csv_path = stem.with_extension("csv");
    let svg_path = stem.with_extension("svg");
    let title = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    fs::write(&csv_path, scatter_csv(proj)).map_err(Error::io(&csv_path))?;
    fs::write(&svg_path, scatter_svg(proj, &title)).map_err(Error::io(&svg_path))?;
    Ok((csv_path, svg_path))
}
