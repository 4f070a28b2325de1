#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use tdqas::hamiltonian::{DriveFunction, Sinusoid, TimeDependentHamiltonian};
use tdqas::overlap::Jump;
use tdqas::{PauliString, PauliSum, C64};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn sum(n: usize, terms: &[(f64, &str)]) -> PauliSum {
    PauliSum::from_labels(n, terms.iter().map(|(k, l)| (c(*k, 0.0), *l))).unwrap()
}

pub fn label(n: usize, s: &str) -> PauliString {
    PauliString::parse(s, n).unwrap()
}

/// `Z + sin(ωt)X`
pub fn one_qubit(omega: f64) -> TimeDependentHamiltonian {
    TimeDependentHamiltonian::from_pairs(
        1,
        vec![
            (DriveFunction::constant(1.0), sum(1, &[(1.0, "Z")])),
            (DriveFunction::sin(1.0, omega, 0.0), sum(1, &[(1.0, "X")])),
        ],
    )
    .unwrap()
}

/// `(Z1Z2 + Z2Z3) + sin(ωt)X2`
pub fn three_qubit(omega: f64) -> TimeDependentHamiltonian {
    TimeDependentHamiltonian::from_pairs(
        3,
        vec![
            (DriveFunction::constant(1.0), sum(3, &[(1.0, "Z1 Z2"), (1.0, "Z2 Z3")])),
            (DriveFunction::sin(1.0, omega, 0.0), sum(3, &[(1.0, "X2")])),
        ],
    )
    .unwrap()
}

/// `X1X2 + sin(2πt)Y2`
pub fn two_qubit_demo() -> TimeDependentHamiltonian {
    TimeDependentHamiltonian::from_pairs(
        2,
        vec![
            (DriveFunction::constant(1.0), sum(2, &[(1.0, "X1 X2")])),
            (DriveFunction::sin(1.0, 2.0 * PI, 0.0), sum(2, &[(1.0, "Y2")])),
        ],
    )
    .unwrap()
}

pub const DEMO_ANGLES: [f64; 6] = [2.846, 1.367, 3.172, 0.011, 0.148, 0.841];

/// `Σ Z_i X_{i+1} Z_{i+2} + sin(2πt) X3Y4X5`, either wrapping indices or
/// keeping only terms inside the chain.
pub fn seven_qubit(periodic: bool) -> TimeDependentHamiltonian {
    let n = 7;
    let last = if periodic { n } else { n - 2 };
    let labels: Vec<String> = (1..=last)
        .map(|i| {
            let s = |k: usize| (i - 1 + k) % n + 1;
            format!("Z{} X{} Z{}", s(0), s(1), s(2))
        })
        .collect();
    let static_part = PauliSum::from_labels(n, labels.iter().map(|l| (c(1.0, 0.0), l.as_str()))).unwrap();
    TimeDependentHamiltonian::from_pairs(
        n,
        vec![
            (DriveFunction::constant(1.0), static_part),
            (DriveFunction::sin(1.0, 2.0 * PI, 0.0), sum(n, &[(1.0, "X3 Y4 X5")])),
        ],
    )
    .unwrap()
}

/// `Σ_{i=1}^{10} Z_iZ_{i+1} + (sin 2πt + ½ sin 4πt) X5Y6X7`
pub fn eleven_qubit() -> TimeDependentHamiltonian {
    let n = 11;
    let labels: Vec<String> = (1..n).map(|i| format!("Z{} Z{}", i, i + 1)).collect();
    let ising = PauliSum::from_labels(n, labels.iter().map(|l| (c(1.0, 0.0), l.as_str()))).unwrap();
    let drive = DriveFunction::SumOfSinusoids {
        parts: vec![
            Sinusoid { amplitude: 1.0, omega: 2.0 * PI, phase: 0.0 },
            Sinusoid { amplitude: 0.5, omega: 4.0 * PI, phase: 0.0 },
        ],
    };
    TimeDependentHamiltonian::from_pairs(
        n,
        vec![(DriveFunction::constant(1.0), ising), (drive, sum(n, &[(1.0, "X5 Y6 X7")]))],
    )
    .unwrap()
}

/// `σ⁻ = (X + iY)/2` on one qubit.
pub fn lowering() -> PauliSum {
    let mut l = PauliSum::new(1);
    l.add_string(c(0.5, 0.0), &label(1, "X"));
    l.add_string(c(0.0, 0.5), &label(1, "Y"));
    l
}

pub fn jump(op: PauliSum, rate: f64) -> Jump {
    Jump { operator: op, rate }
}

fn letter_matrix(ch: char) -> [[C64; 2]; 2] {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    match ch {
        'I' => [[l, o], [o, l]],
        'X' => [[o, l], [l, o]],
        'Y' => [[o, -i], [i, o]],
        'Z' => [[l, o], [o, -l]],
        _ => unreachable!(),
    }
}

/// Dense matrix built entrywise from single-site letters; site `q` is bit `q-1`.
pub fn dense_string(p: &PauliString) -> Array2<C64> {
    let n = p.n_qubits();
    let dim = 1usize << n;
    let letters: Vec<[[C64; 2]; 2]> = (0..n).map(|q| letter_matrix(p.letter(q))).collect();
    Array2::from_shape_fn((dim, dim), |(r, col)| {
        let mut v = p.phase();
        for (q, m) in letters.iter().enumerate() {
            v *= m[(r >> q) & 1][(col >> q) & 1];
        }
        v
    })
}

pub fn dense_sum(op: &PauliSum) -> Array2<C64> {
    let dim = 1usize << op.n_qubits();
    let mut m = Array2::zeros((dim, dim));
    for (p, k) in op.strings() {
        m.scaled_add(k, &dense_string(&p));
    }
    m
}

pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Dense RK4 Lindblad integration; returns `Tr(Oρ)` at each time.
pub fn dense_lindblad(
    h: &TimeDependentHamiltonian,
    jumps: &[Jump],
    psi: &Array1<C64>,
    times: &[f64],
    dt: f64,
    obs: &PauliSum,
) -> Vec<f64> {
    let hs: Vec<Array2<C64>> = h.channels().iter().map(|ch| dense_sum(&ch.operator)).collect();
    let ls: Vec<(Array2<C64>, Array2<C64>, f64)> = jumps
        .iter()
        .map(|j| {
            let l = dense_sum(&j.operator);
            let ldl = adjoint(&l).dot(&l);
            (l, ldl, j.rate)
        })
        .collect();
    let o = dense_sum(obs);
    let rhs = |t: f64, rho: &Array2<C64>| {
        let mut hm = Array2::<C64>::zeros(rho.dim());
        for (m, f) in hs.iter().zip(h.evaluate_drives(t).unwrap()) {
            hm.scaled_add(c(f, 0.0), m);
        }
        let mut out = (hm.dot(rho) - rho.dot(&hm)) * c(0.0, -1.0);
        for (l, ldl, g) in &ls {
            let d = l.dot(rho).dot(&adjoint(l)) - (ldl.dot(rho) + rho.dot(ldl)) * c(0.5, 0.0);
            out = out + d * c(*g, 0.0);
        }
        out
    };
    let col = psi.clone().insert_axis(Axis(1));
    let mut rho = col.dot(&adjoint(&col));
    let mut t = times[0];
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let steps = ((target - t) / dt).round() as usize;
        let h_step = if steps > 0 { (target - t) / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            let k1 = rhs(t, &rho);
            let k2 = rhs(t + h_step / 2.0, &(&rho + &(&k1 * c(h_step / 2.0, 0.0))));
            let k3 = rhs(t + h_step / 2.0, &(&rho + &(&k2 * c(h_step / 2.0, 0.0))));
            let k4 = rhs(t + h_step, &(&rho + &(&k3 * c(h_step, 0.0))));
            rho = &rho + &((k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h_step / 6.0, 0.0));
            t += h_step;
        }
        t = target;
        out.push(o.dot(&rho).diag().sum().re);
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `P|ψ⟩` column by column from single-site letters.
pub fn apply_oracle(p: &PauliString, psi: &Array1<C64>) -> Array1<C64> {
    let n = p.n_qubits();
    let letters: Vec<[[C64; 2]; 2]> = (0..n).map(|q| letter_matrix(p.letter(q))).collect();
    let flip: usize = (0..n).filter(|&q| matches!(p.letter(q), 'X' | 'Y')).map(|q| 1 << q).sum();
    let mut out = Array1::zeros(psi.len());
    for col in 0..psi.len() {
        let row = col ^ flip;
        let mut v = p.phase();
        for (q, m) in letters.iter().enumerate() {
            v *= m[(row >> q) & 1][(col >> q) & 1];
        }
        out[row] += v * psi[col];
    }
    out
}

pub fn apply_sum_oracle(op: &PauliSum, psi: &Array1<C64>) -> Array1<C64> {
    let mut out = Array1::zeros(psi.len());
    for (p, k) in op.strings() {
        out.scaled_add(k, &apply_oracle(&p, psi));
    }
    out
}

/// RK4 Schrödinger integration with steps no longer than `dt`; returns the
/// state at each time.
pub fn oracle_evolve(h: &TimeDependentHamiltonian, psi: &Array1<C64>, times: &[f64], dt: f64) -> Vec<Array1<C64>> {
    let rhs = |t: f64, v: &Array1<C64>| {
        let mut out = Array1::<C64>::zeros(v.len());
        for (ch, f) in h.channels().iter().zip(h.evaluate_drives(t).unwrap()) {
            if f != 0.0 {
                out.scaled_add(c(0.0, -f), &apply_sum_oracle(&ch.operator, v));
            }
        }
        out
    };
    let mut v = psi.clone();
    let mut t = times[0];
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let steps = ((target - t) / dt).ceil() as usize;
        let hs = if steps > 0 { (target - t) / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            let k1 = rhs(t, &v);
            let k2 = rhs(t + hs / 2.0, &(&v + &(&k1 * c(hs / 2.0, 0.0))));
            let k3 = rhs(t + hs / 2.0, &(&v + &(&k2 * c(hs / 2.0, 0.0))));
            let k4 = rhs(t + hs, &(&v + &(&k3 * c(hs, 0.0))));
            v = &v + &((k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(hs / 6.0, 0.0));
            t += hs;
        }
        t = target;
        out.push(v.clone());
    }
    out
}

pub fn expectation_oracle(op: &PauliSum, psi: &Array1<C64>) -> f64 {
    psi.iter().zip(apply_sum_oracle(op, psi).iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re
}

/// `|⟨ref|φ⟩|² / ⟨φ|φ⟩` for `φ = Σ α_i P_i|ψ⟩`.
pub fn ansatz_fidelity(alpha: &Array1<C64>, basis: &[PauliString], psi: &Array1<C64>, reference: &Array1<C64>) -> f64 {
    let mut phi = Array1::<C64>::zeros(psi.len());
    for (a, p) in alpha.iter().zip(basis) {
        phi.scaled_add(*a, &apply_oracle(p, psi));
    }
    let ov: C64 = reference.iter().zip(phi.iter()).map(|(r, f)| r.conj() * f).sum();
    let nn: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    ov.norm_sqr() / nn
}
