//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    val: f64,
    err: f64,
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`, bisecting the
/// panel with the largest error estimate first.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut panels: Vec<Panel> = Vec::new();
    let n0 = 8;
    for i in 0..n0 {
        let lo = a + (b - a) * i as f64 / n0 as f64;
        let hi = a + (b - a) * (i + 1) as f64 / n0 as f64;
        let (val, err) = gk15(&mut f, lo, hi);
        panels.push(Panel { lo, hi, val, err });
    }
    for _ in 0..4000 {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= tol {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("nonempty");
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            panels.push(Panel { err: 0.0, ..p });
            continue;
        }
        let (v1, e1) = gk15(&mut f, p.lo, mid);
        let (v2, e2) = gk15(&mut f, mid, p.hi);
        panels.push(Panel { lo: p.lo, hi: mid, val: v1, err: e1 });
        panels.push(Panel { lo: mid, hi: p.hi, val: v2, err: e2 });
    }
    let mut vals: Vec<f64> = panels.iter().map(|p| p.val).collect();
    vals.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    crate::special::compensated_sum(vals)
}

/// Integral over `[0, 1]` after the substitution `u = v^4`, which tames
/// algebraic singularities at 0.
pub fn integrate_unit(mut f: impl FnMut(f64) -> f64, tol: f64) -> f64 {
    integrate(
        |v| {
            let v2 = v * v;
            let u = v2 * v2;
            if u <= 0.0 {
                0.0
            } else {
                4.0 * v2 * v * f(u)
            }
        },
        0.0,
        1.0,
        tol,
    )
}
