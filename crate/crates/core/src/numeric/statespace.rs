use nalgebra::DMatrix;
use num_complex::Complex64;

use super::eigen::{balance, eigenvalues, MAX_STATES};
use super::rational::RationalFunction;
use super::NumericError;

/// Real linear time-invariant system `ẋ = A·x + B·u`, `y = C·x + D·u`.
#[derive(Clone, Debug)]
pub struct RealStateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RealStateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Result<Self, NumericError> {
        let n = a.nrows();
        let ok = a.ncols() == n
            && b.nrows() == n
            && c.ncols() == n
            && d.nrows() == c.nrows()
            && d.ncols() == b.ncols()
            && inputs.len() == b.ncols()
            && outputs.len() == c.nrows();
        if !ok {
            return Err(NumericError::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}, {} input labels, {} output labels",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols(),
                inputs.len(),
                outputs.len()
            )));
        }
        if [&a, &b, &c, &d].iter().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(NumericError::NonFinite);
        }
        Ok(RealStateSpace { a, b, c, d, inputs, outputs })
    }

    /// Pure gain block with no states.
    pub fn gain(k: DMatrix<f64>) -> Self {
        let (p, m) = k.shape();
        RealStateSpace {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d: k,
            inputs: (0..m).map(|i| format!("u{i}")).collect(),
            outputs: (0..p).map(|i| format!("y{i}")).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|s| s == name)
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|s| s == name)
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>, NumericError> {
        eigenvalues(&self.a)
    }

    /// `C·(sI − A)⁻¹·B + D`.
    pub fn freq_response(&self, s: Complex64) -> Result<DMatrix<Complex64>, NumericError> {
        let n = self.n_states();
        let cd = self.d.map(|x| Complex64::new(x, 0.0));
        if n == 0 {
            return Ok(cd);
        }
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let bc = self.b.map(|x| Complex64::new(x, 0.0));
        let x = m
            .lu()
            .solve(&bc)
            .ok_or(NumericError::PoleAtEvaluation { re: s.re, im: s.im })?;
        Ok(self.c.map(|x| Complex64::new(x, 0.0)) * x + cd)
    }

    /// Scalar channel `output ← input` at `s`.
    pub fn channel(&self, output: usize, input: usize, s: Complex64) -> Result<Complex64, NumericError> {
        Ok(self.freq_response(s)?[(output, input)])
    }

    /// Relabels inputs and outputs.
    pub fn with_labels(mut self, inputs: &[&str], outputs: &[&str]) -> Result<Self, NumericError> {
        if inputs.len() != self.n_inputs() || outputs.len() != self.n_outputs() {
            return Err(NumericError::Dimension("label count".into()));
        }
        self.inputs = inputs.iter().map(|s| s.to_string()).collect();
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }
}

/// Complex-valued realization `(A, B, C, D)` of a single-input single-output function.
#[derive(Clone, Debug)]
pub struct ComplexSiso {
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
    pub c: DMatrix<Complex64>,
    pub d: Complex64,
}

/// Controllable canonical form of a proper rational function.
pub fn controllable_canonical(rf: &RationalFunction) -> Result<ComplexSiso, NumericError> {
    if !rf.is_proper() {
        return Err(NumericError::Improper);
    }
    let den = rf.den().coeffs();
    let n = den.len() - 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut num: Vec<Complex64> = rf.num().coeffs().to_vec();
    num.resize(n + 1, zero);
    let d = num[n];
    let mut a = DMatrix::from_element(n, n, zero);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = Complex64::new(1.0, 0.0);
    }
    for j in 0..n {
        a[(n - 1, j)] = -den[j];
    }
    let mut b = DMatrix::from_element(n, 1, zero);
    if n > 0 {
        b[(n - 1, 0)] = Complex64::new(1.0, 0.0);
    }
    let c = DMatrix::from_fn(1, n, |_, j| num[j] - d * den[j]);
    Ok(ComplexSiso { a, b, c, d })
}

/// Real realization of a real-coefficient function.
pub fn realize_real(rf: &RationalFunction) -> Result<RealStateSpace, NumericError> {
    if !rf.is_real(1e-12) {
        return Err(NumericError::NotRealCoefficients);
    }
    let cs = controllable_canonical(rf)?;
    let n = cs.a.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cs.a[(i, j)].re).collect()).collect();
    let dscale = balance(&mut a);
    let am = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let b = DMatrix::from_fn(n, 1, |i, _| cs.b[(i, 0)].re / dscale[i]);
    let c = DMatrix::from_fn(1, n, |_, j| cs.c[(0, j)].re * dscale[j]);
    let d = DMatrix::from_element(1, 1, cs.d.re);
    RealStateSpace::new(am, b, c, d, vec!["u".into()], vec!["y".into()])
}

/// Real 2n-state realization of a complex-coefficient function acting on a
/// two-component signal `[x_d; x_q] ↔ x_d + j·x_q`.
///
/// For a real-coefficient function this is two decoupled copies of the real realization.
/// Diagonally balanced controllable canonical form.
///
/// Returns the realization and the scaling `ds` with `x_canonical = diag(ds)·x`.
pub fn balanced_canonical(rf: &RationalFunction) -> Result<(ComplexSiso, Vec<f64>), NumericError> {
    let cs = controllable_canonical(rf)?;
    let n = cs.a.nrows();
    // balance on the magnitude pattern, then apply the same diagonal scaling to the complex matrix
    let mut mag: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cs.a[(i, j)].norm()).collect()).collect();
    let ds = balance(&mut mag);
    let a = DMatrix::from_fn(n, n, |i, j| cs.a[(i, j)] * (ds[j] / ds[i]));
    let b = DMatrix::from_fn(n, 1, |i, _| cs.b[(i, 0)] / ds[i]);
    let c = DMatrix::from_fn(1, n, |_, j| cs.c[(0, j)] * ds[j]);
    Ok((ComplexSiso { a, b, c, d: cs.d }, ds))
}

pub fn realize_complex(rf: &RationalFunction) -> Result<RealStateSpace, NumericError> {
    let (cs, _) = balanced_canonical(rf)?;
    let (ac, bc, cc) = (&cs.a, &cs.b, &cs.c);
    let embed = |m: &DMatrix<Complex64>| {
        let (r, c) = m.shape();
        DMatrix::from_fn(2 * r, 2 * c, |i, j| {
            let z = m[(i % r, j % c)];
            match (i / r, j / c) {
                (0, 0) | (1, 1) => z.re,
                (0, 1) => -z.im,
                _ => z.im,
            }
        })
    };
    let d = DMatrix::from_element(1, 1, cs.d);
    RealStateSpace::new(
        embed(ac),
        embed(bc),
        embed(cc),
        embed(&d),
        vec!["u_d".into(), "u_q".into()],
        vec!["y_d".into(), "y_q".into()],
    )
}

/// Where a block input takes its signal from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signal {
    /// Output `port` of block `block`.
    Block(usize, usize),
    /// External input number.
    Input(usize),
}

impl Signal {
    fn offset(self, k: usize) -> Signal {
        match self {
            Signal::Block(b, p) => Signal::Block(b, p + k),
            Signal::Input(i) => Signal::Input(i + k),
        }
    }
}

/// Block-diagram builder. Block inputs are sums of weighted signals; the
/// algebraic loops created by direct feedthrough are solved at build time.
#[derive(Clone, Debug, Default)]
pub struct Interconnection {
    blocks: Vec<(String, RealStateSpace)>,
    inputs: Vec<String>,
    wires: Vec<(usize, usize, Signal, f64)>,
    outputs: Vec<(String, Vec<(Signal, f64)>)>,
}

impl Interconnection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: &str, ss: RealStateSpace) -> usize {
        self.blocks.push((name.to_string(), ss));
        self.blocks.len() - 1
    }

    pub fn add_input(&mut self, name: &str) -> Signal {
        self.inputs.push(name.to_string());
        Signal::Input(self.inputs.len() - 1)
    }

    /// Adds `gain · src` to input `port` of block `block`.
    pub fn wire(&mut self, block: usize, port: usize, src: Signal, gain: f64) {
        if gain != 0.0 {
            self.wires.push((block, port, src, gain));
        }
    }

    /// Adds `m · [src, src+1]` to inputs `port, port+1` of `block`.
    pub fn wire2(&mut self, block: usize, port: usize, src: Signal, m: [[f64; 2]; 2]) {
        for (i, row) in m.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                self.wire(block, port + i, src.offset(j), g);
            }
        }
    }

    /// Adds `v · src` to input `port` of `block` for a 2-vector source (row vector gain).
    pub fn wire_row(&mut self, block: usize, port: usize, src: Signal, v: [f64; 2]) {
        self.wire(block, port, src, v[0]);
        self.wire(block, port, src.offset(1), v[1]);
    }

    /// Adds `v · src` to inputs `port, port+1` of `block` for a scalar source (column gain).
    pub fn wire_col(&mut self, block: usize, port: usize, src: Signal, v: [f64; 2]) {
        self.wire(block, port, src, v[0]);
        self.wire(block, port + 1, src, v[1]);
    }

    pub fn add_output(&mut self, name: &str, terms: Vec<(Signal, f64)>) {
        self.outputs.push((name.to_string(), terms));
    }

    pub fn build(&self) -> Result<RealStateSpace, NumericError> {
        let nb = self.blocks.len();
        let mut xo = vec![0usize; nb + 1];
        let mut uo = vec![0usize; nb + 1];
        let mut yo = vec![0usize; nb + 1];
        for (k, (_, ss)) in self.blocks.iter().enumerate() {
            xo[k + 1] = xo[k] + ss.n_states();
            uo[k + 1] = uo[k] + ss.n_inputs();
            yo[k + 1] = yo[k] + ss.n_outputs();
        }
        let (n, nu, ny, nr) = (xo[nb], uo[nb], yo[nb], self.inputs.len());
        if n > MAX_STATES {
            return Err(NumericError::MatrixCap { n });
        }
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, nu);
        let mut c = DMatrix::zeros(ny, n);
        let mut d = DMatrix::zeros(ny, nu);
        for (k, (_, ss)) in self.blocks.iter().enumerate() {
            a.view_mut((xo[k], xo[k]), (ss.n_states(), ss.n_states())).copy_from(&ss.a);
            b.view_mut((xo[k], uo[k]), (ss.n_states(), ss.n_inputs())).copy_from(&ss.b);
            c.view_mut((yo[k], xo[k]), (ss.n_outputs(), ss.n_states())).copy_from(&ss.c);
            d.view_mut((yo[k], uo[k]), (ss.n_outputs(), ss.n_inputs())).copy_from(&ss.d);
        }
        let locate = |s: Signal| -> Result<(bool, usize), NumericError> {
            match s {
                Signal::Block(bk, p) => {
                    if bk >= nb || p >= self.blocks[bk].1.n_outputs() {
                        Err(NumericError::Dimension(format!("no output {p} on block {bk}")))
                    } else {
                        Ok((true, yo[bk] + p))
                    }
                }
                Signal::Input(i) => {
                    if i >= nr {
                        Err(NumericError::Dimension(format!("no external input {i}")))
                    } else {
                        Ok((false, i))
                    }
                }
            }
        };
        let mut w = DMatrix::zeros(nu, ny);
        let mut nmat = DMatrix::zeros(nu, nr);
        for &(bk, port, src, g) in &self.wires {
            if bk >= nb || port >= self.blocks[bk].1.n_inputs() {
                return Err(NumericError::Dimension(format!(
                    "no input {port} on block {bk}"
                )));
            }
            let (is_block, idx) = locate(src)?;
            if is_block {
                w[(uo[bk] + port, idx)] += g;
            } else {
                nmat[(uo[bk] + port, idx)] += g;
            }
        }
        // y = M (C x + D N r),  M = (I − D W)⁻¹
        let iw = DMatrix::<f64>::identity(ny, ny) - &d * &w;
        let lu = iw.clone().lu();
        let m = lu.try_inverse().ok_or(NumericError::IllPosedLoop)?;
        let cond = iw.abs().row_sum().max() * m.abs().row_sum().max();
        if !cond.is_finite() || cond > 1e12 {
            return Err(NumericError::IllPosedLoop);
        }
        let my_x = &m * &c;
        let my_r = &m * &d * &nmat;
        let a_cl = &a + &b * &w * &my_x;
        let b_cl = &b * (&w * &my_r + &nmat);
        let no = self.outputs.len();
        let mut sy = DMatrix::zeros(no, ny);
        let mut sr = DMatrix::zeros(no, nr);
        for (o, (_, terms)) in self.outputs.iter().enumerate() {
            for &(src, g) in terms {
                let (is_block, idx) = locate(src)?;
                if is_block {
                    sy[(o, idx)] += g;
                } else {
                    sr[(o, idx)] += g;
                }
            }
        }
        let c_cl = &sy * &my_x;
        let d_cl = &sy * &my_r + &sr;
        RealStateSpace::new(
            a_cl,
            b_cl,
            c_cl,
            d_cl,
            self.inputs.clone(),
            self.outputs.iter().map(|(s, _)| s.clone()).collect(),
        )
    }

    /// Offsets of each block's states inside the assembled state vector.
    pub fn state_offsets(&self) -> Vec<(String, usize, usize)> {
        let mut off = 0;
        self.blocks
            .iter()
            .map(|(name, ss)| {
                let r = (name.clone(), off, ss.n_states());
                off += ss.n_states();
                r
            })
            .collect()
    }
}
