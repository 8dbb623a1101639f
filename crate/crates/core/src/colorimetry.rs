//! Spectral integration and XYZ ↔ sRGB conversion.
//!
//! A sampled spectrum is integrated against the three color matching
//! channels to obtain tristimulus values (X, Y, Z). Tristimulus values
//! convert to display sRGB through a fixed 3×3 matrix followed by the
//! piecewise gamma transfer function, and back through the exact inverses
//! of both steps. All conversions are pure functions.

use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::Path;
use std::sync::LazyLock;

use crate::quad::trapezoid;

pub mod cie1931;

/// Half a quantization step below the 8-bit grid: pixel values 0 and 255
/// stay inside the open unit cube without moving interior samples.
pub const DEFAULT_CLAMP_EPS: f64 = 1.0 / (2.0 * 255.0 * 256.0);

/// XYZ → linear sRGB conversion matrix.
pub const XYZ_TO_LINEAR_RGB: [[f64; 3]; 3] = [
    [3.2406, -1.5372, -0.4986],
    [-0.9689, 1.8758, 0.0415],
    [0.0557, -0.2040, 1.0570],
];

/// Inverse of [`XYZ_TO_LINEAR_RGB`], computed once by exact 3×3 inversion.
pub static LINEAR_RGB_TO_XYZ: LazyLock<[[f64; 3]; 3]> =
    LazyLock::new(|| invert3(&XYZ_TO_LINEAR_RGB).expect("conversion matrix is invertible"));

/// Threshold between the linear and power branches of the transfer function.
pub const GAMMA_KNOT: f64 = 0.0031308;

/// Encoded image of [`GAMMA_KNOT`]; derived, not hardcoded, so the decode
/// branch switch inverts the encode branch switch exactly.
pub const GAMMA_KNOT_ENCODED: f64 = 323.0 * GAMMA_KNOT / 25.0;

#[derive(Debug)]
pub enum ColorimetryError {
    /// Wavelength grid not strictly increasing, too short, or misaligned
    /// with its values.
    BadGrid(String),
    /// A sampled value is negative or non-finite.
    BadValue {
        wavelength: f64,
        value: f64,
    },
    /// Channels do not share one identical wavelength grid.
    GridMismatch,
    /// The spectrum and the weighting channels cover no common wavelength
    /// interval.
    EmptyOverlap,
    /// A tristimulus component is outside the positive octant.
    NonPositive {
        component: char,
        value: f64,
    },
    /// Transfer-function argument outside [0, 1].
    OutOfDomain(f64),
    /// Integration scale factor must be positive and finite.
    BadScale(f64),
    /// Malformed CSV input.
    Csv {
        line: u64,
        message: String,
    },
    Io(io::Error),
}

impl fmt::Display for ColorimetryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorimetryError::BadGrid(msg) => write!(f, "bad wavelength grid: {msg}"),
            ColorimetryError::BadValue { wavelength, value } => {
                write!(f, "bad sample {value} at {wavelength} nm")
            }
            ColorimetryError::GridMismatch => {
                write!(f, "channels must share one wavelength grid")
            }
            ColorimetryError::EmptyOverlap => {
                write!(f, "no common wavelength range to integrate over")
            }
            ColorimetryError::NonPositive { component, value } => {
                write!(f, "tristimulus {component} = {value} is not positive")
            }
            ColorimetryError::OutOfDomain(v) => {
                write!(f, "transfer function argument {v} outside [0, 1]")
            }
            ColorimetryError::BadScale(k) => write!(f, "scale factor {k} must be positive"),
            ColorimetryError::Csv { line, message } => {
                write!(f, "csv line {line}: {message}")
            }
            ColorimetryError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for ColorimetryError {}

impl From<io::Error> for ColorimetryError {
    fn from(e: io::Error) -> Self {
        ColorimetryError::Io(e)
    }
}

/// A sampled function of wavelength λ ↦ φ(λ) on an ascending grid in nm.
///
/// Holds radiance spectra as well as sensitivity channels; values are
/// nonnegative and the grid is strictly increasing with at least two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDistribution {
    wavelengths: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralDistribution {
    pub fn new(wavelengths: Vec<f64>, values: Vec<f64>) -> Result<Self, ColorimetryError> {
        if wavelengths.len() != values.len() {
            return Err(ColorimetryError::BadGrid(format!(
                "{} wavelengths vs {} values",
                wavelengths.len(),
                values.len()
            )));
        }
        if wavelengths.len() < 2 {
            return Err(ColorimetryError::BadGrid(
                "need at least two samples".into(),
            ));
        }
        if wavelengths.iter().any(|w| !w.is_finite())
            || wavelengths.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(ColorimetryError::BadGrid(
                "wavelengths must be finite and strictly increasing".into(),
            ));
        }
        for (&wl, &v) in wavelengths.iter().zip(&values) {
            if !v.is_finite() || v < 0.0 {
                return Err(ColorimetryError::BadValue {
                    wavelength: wl,
                    value: v,
                });
            }
        }
        Ok(Self {
            wavelengths,
            values,
        })
    }

    /// Constant level over `[lo, hi]` on a two-node grid.
    pub fn constant(lo: f64, hi: f64, level: f64) -> Result<Self, ColorimetryError> {
        Self::new(vec![lo, hi], vec![level, level])
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_wavelength(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn max_wavelength(&self) -> f64 {
        *self.wavelengths.last().unwrap()
    }

    /// Linear interpolation between grid nodes; `None` outside the sampled
    /// range.
    pub fn sample_at(&self, wavelength: f64) -> Option<f64> {
        if wavelength < self.min_wavelength() || wavelength > self.max_wavelength() {
            return None;
        }
        match self
            .wavelengths
            .binary_search_by(|w| w.partial_cmp(&wavelength).unwrap())
        {
            Ok(i) => Some(self.values[i]),
            Err(i) => {
                let (w0, w1) = (self.wavelengths[i - 1], self.wavelengths[i]);
                let t = (wavelength - w0) / (w1 - w0);
                Some(self.values[i - 1] + t * (self.values[i] - self.values[i - 1]))
            }
        }
    }

    /// Reads a two-column CSV with header `wavelength_nm,value`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ColorimetryError> {
        let (grid, columns) = read_numeric_csv(reader, &["wavelength_nm", "value"])?;
        let [values] = <[Vec<f64>; 1]>::try_from(columns).unwrap();
        Self::new(grid, values)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, ColorimetryError> {
        Self::from_csv_reader(File::open(path)?)
    }
}

/// The three color matching channels x̃, ỹ, z̃ on one shared wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorMatchingFunctions {
    grid: Vec<f64>,
    xbar: Vec<f64>,
    ybar: Vec<f64>,
    zbar: Vec<f64>,
}

impl ColorMatchingFunctions {
    /// Builds from three channels, which must share one identical grid.
    pub fn from_channels(
        x: SpectralDistribution,
        y: SpectralDistribution,
        z: SpectralDistribution,
    ) -> Result<Self, ColorimetryError> {
        if x.wavelengths != y.wavelengths || x.wavelengths != z.wavelengths {
            return Err(ColorimetryError::GridMismatch);
        }
        Ok(Self {
            grid: x.wavelengths,
            xbar: x.values,
            ybar: y.values,
            zbar: z.values,
        })
    }

    /// Built-in CIE 1931 2° standard observer (380–780 nm, 5 nm step).
    pub fn cie_1931_2deg() -> Self {
        let n = cie1931::CIE_1931_2DEG_5NM.len();
        let mut grid = Vec::with_capacity(n);
        let mut xbar = Vec::with_capacity(n);
        let mut ybar = Vec::with_capacity(n);
        let mut zbar = Vec::with_capacity(n);
        for &(wl, x, y, z) in cie1931::CIE_1931_2DEG_5NM.iter() {
            grid.push(wl);
            xbar.push(x);
            ybar.push(y);
            zbar.push(z);
        }
        Self {
            grid,
            xbar,
            ybar,
            zbar,
        }
    }

    /// Reads the CMF CSV format: header `wavelength_nm,xbar,ybar,zbar`,
    /// monotone wavelengths.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ColorimetryError> {
        let (grid, columns) = read_numeric_csv(reader, &["wavelength_nm", "xbar", "ybar", "zbar"])?;
        let [xbar, ybar, zbar] = <[Vec<f64>; 3]>::try_from(columns).unwrap();
        let x = SpectralDistribution::new(grid.clone(), xbar)?;
        let y = SpectralDistribution::new(grid.clone(), ybar)?;
        let z = SpectralDistribution::new(grid, zbar)?;
        Self::from_channels(x, y, z)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, ColorimetryError> {
        Self::from_csv_reader(File::open(path)?)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    pub fn ybar(&self) -> &[f64] {
        &self.ybar
    }

    pub fn zbar(&self) -> &[f64] {
        &self.zbar
    }
}

/// Parses a CSV with a fixed header whose first column is the wavelength
/// grid; returns the grid and the remaining columns.
fn read_numeric_csv<R: Read>(
    reader: R,
    header: &[&str],
) -> Result<(Vec<f64>, Vec<Vec<f64>>), ColorimetryError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let got = rdr
        .headers()
        .map_err(|e| ColorimetryError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = got.iter().collect();
    if names.len() != header.len()
        || names
            .iter()
            .zip(header)
            .any(|(a, b)| !a.eq_ignore_ascii_case(b))
    {
        return Err(ColorimetryError::Csv {
            line: 1,
            message: format!("expected header {:?}, got {:?}", header, names),
        });
    }
    let mut grid = Vec::new();
    let mut columns = vec![Vec::new(); header.len() - 1];
    for record in rdr.records() {
        let record = record.map_err(|e| ColorimetryError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(ColorimetryError::Csv {
                line,
                message: format!("expected {} fields, got {}", header.len(), record.len()),
            });
        }
        let mut parsed = record.iter().map(|field| {
            field.parse::<f64>().map_err(|_| ColorimetryError::Csv {
                line,
                message: format!("not a number: {field:?}"),
            })
        });
        grid.push(parsed.next().unwrap()?);
        for column in columns.iter_mut() {
            column.push(parsed.next().unwrap()?);
        }
    }
    Ok((grid, columns))
}

/// Tristimulus values (X, Y, Z); every component strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tristimulus {
    x: f64,
    y: f64,
    z: f64,
}

impl Tristimulus {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ColorimetryError> {
        for (component, value) in [('X', x), ('Y', y), ('Z', z)] {
            if value <= 0.0 || !value.is_finite() {
                return Err(ColorimetryError::NonPositive { component, value });
            }
        }
        Ok(Self { x, y, z })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Linear-light RGB, the stage between the conversion matrix and the
/// transfer function. Components may leave [0, 1] for out-of-gamut
/// tristimulus inputs; gamut membership is a query, not an invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl LinearRgb {
    pub fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub fn in_gamut(&self) -> bool {
        self.components().iter().all(|c| (0.0..=1.0).contains(c))
    }

    pub fn components(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

/// Display sRGB scaled into the open unit cube (0,1)³.
///
/// Construction clamps each component into `(eps, 1-eps)`, so downstream
/// logarithms stay finite even for pixel data that hits exactly 0 or 255.
/// Panics on NaN inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitRgb {
    u: f64,
    v: f64,
    w: f64,
}

impl UnitRgb {
    /// Clamps with [`DEFAULT_CLAMP_EPS`].
    pub fn new(u: f64, v: f64, w: f64) -> Self {
        Self::clamped(u, v, w, DEFAULT_CLAMP_EPS).0
    }

    /// Clamps each component into `(eps, 1-eps)`; the flag reports whether
    /// any component moved.
    pub fn clamped(u: f64, v: f64, w: f64, eps: f64) -> (Self, bool) {
        assert!(eps > 0.0 && eps < 0.5, "clamp eps must lie in (0, 0.5)");
        assert!(
            !u.is_nan() && !v.is_nan() && !w.is_nan(),
            "UnitRgb components must not be NaN"
        );
        let clamp = |t: f64| t.clamp(eps, 1.0 - eps);
        let (cu, cv, cw) = (clamp(u), clamp(v), clamp(w));
        let moved = cu != u || cv != v || cw != w;
        (
            Self {
                u: cu,
                v: cv,
                w: cw,
            },
            moved,
        )
    }

    /// For results that are mathematically interior to (0,1), e.g. group
    /// operations and exact inverses: leaves values untouched except where
    /// floating point collapses them onto the boundary.
    pub(crate) fn interior(u: f64, v: f64, w: f64) -> Self {
        let fix = |t: f64| {
            debug_assert!((0.0..=1.0).contains(&t));
            if t <= 0.0 {
                f64::MIN_POSITIVE
            } else if t >= 1.0 {
                1.0f64.next_down()
            } else {
                t
            }
        };
        Self {
            u: fix(u),
            v: fix(v),
            w: fix(w),
        }
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn components(&self) -> [f64; 3] {
        [self.u, self.v, self.w]
    }
}

/// Choice for the free scale factor in tristimulus integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Multiply all three integrals by a fixed k.
    Scale(f64),
    /// Choose k so the luminance integral comes out at Y = 100.
    LuminanceY100,
}

/// Trapezoid integral of `spd · weights` over the part of `grid` covered by
/// the spd, with the spd linearly interpolated onto the grid.
pub(crate) fn integrate_product(
    spd: &SpectralDistribution,
    grid: &[f64],
    weights: &[f64],
) -> Result<f64, ColorimetryError> {
    debug_assert_eq!(grid.len(), weights.len());
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for (&wl, &w) in grid.iter().zip(weights) {
        if let Some(v) = spd.sample_at(wl) {
            xs.push(wl);
            ys.push(v * w);
        }
    }
    if xs.len() < 2 {
        return Err(ColorimetryError::EmptyOverlap);
    }
    Ok(trapezoid(&xs, &ys))
}

/// Integrates a spectrum against the three matching channels:
/// `(k∫φx̃, k∫φỹ, k∫φz̃)` by trapezoidal quadrature on the channel grid.
///
/// Fails on an empty wavelength overlap and when any channel integrates to
/// zero (the result would leave the positive octant).
pub fn integrate_tristimulus(
    spd: &SpectralDistribution,
    cmf: &ColorMatchingFunctions,
    k: f64,
) -> Result<Tristimulus, ColorimetryError> {
    if k <= 0.0 || !k.is_finite() {
        return Err(ColorimetryError::BadScale(k));
    }
    let x = k * integrate_product(spd, &cmf.grid, &cmf.xbar)?;
    let y = k * integrate_product(spd, &cmf.grid, &cmf.ybar)?;
    let z = k * integrate_product(spd, &cmf.grid, &cmf.zbar)?;
    Tristimulus::new(x, y, z)
}

/// [`integrate_tristimulus`] with the scale factor chosen per
/// [`Normalization`].
pub fn integrate_tristimulus_normalized(
    spd: &SpectralDistribution,
    cmf: &ColorMatchingFunctions,
    normalization: Normalization,
) -> Result<Tristimulus, ColorimetryError> {
    match normalization {
        Normalization::Scale(k) => integrate_tristimulus(spd, cmf, k),
        Normalization::LuminanceY100 => {
            let raw = integrate_tristimulus(spd, cmf, 1.0)?;
            let k = 100.0 / raw.y();
            Tristimulus::new(k * raw.x(), 100.0, k * raw.z())
        }
    }
}

fn mat_mul3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let cofactor =
        |r1: usize, r2: usize, c1: usize, c2: usize| m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1];
    Some([
        [
            cofactor(1, 2, 1, 2) / det,
            -cofactor(0, 2, 1, 2) / det,
            cofactor(0, 1, 1, 2) / det,
        ],
        [
            -cofactor(1, 2, 0, 2) / det,
            cofactor(0, 2, 0, 2) / det,
            -cofactor(0, 1, 0, 2) / det,
        ],
        [
            cofactor(1, 2, 0, 1) / det,
            -cofactor(0, 2, 0, 1) / det,
            cofactor(0, 1, 0, 1) / det,
        ],
    ])
}

/// Applies the fixed conversion matrix; out-of-gamut inputs yield components
/// outside [0, 1] rather than an error.
pub fn xyz_to_linear_rgb(t: &Tristimulus) -> LinearRgb {
    let [r, g, b] = mat_mul3(&XYZ_TO_LINEAR_RGB, t.components());
    LinearRgb::new(r, g, b)
}

/// Applies the inverse conversion matrix; fails when the result leaves the
/// positive octant.
pub fn linear_rgb_to_xyz(c: &LinearRgb) -> Result<Tristimulus, ColorimetryError> {
    let [x, y, z] = mat_mul3(&LINEAR_RGB_TO_XYZ, c.components());
    Tristimulus::new(x, y, z)
}

/// Gamma transfer function: `323u/25` below the knot, else
/// `(211 u^(5/12) - 11)/200`.
pub fn gamma_encode(u: f64) -> Result<f64, ColorimetryError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(ColorimetryError::OutOfDomain(u));
    }
    Ok(if u <= GAMMA_KNOT {
        323.0 * u / 25.0
    } else {
        (211.0 * u.powf(5.0 / 12.0) - 11.0) / 200.0
    })
}

/// Exact piecewise inverse of [`gamma_encode`].
pub fn gamma_decode(v: f64) -> Result<f64, ColorimetryError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(ColorimetryError::OutOfDomain(v));
    }
    Ok(if v <= GAMMA_KNOT_ENCODED {
        25.0 * v / 323.0
    } else {
        ((200.0 * v + 11.0) / 211.0).powf(12.0 / 5.0)
    })
}

/// XYZ → display sRGB with [`DEFAULT_CLAMP_EPS`]; see
/// [`xyz_to_srgb_clamped`].
pub fn xyz_to_srgb(t: &Tristimulus) -> (UnitRgb, bool) {
    xyz_to_srgb_clamped(t, DEFAULT_CLAMP_EPS)
}

/// Matrix then transfer function, with the result clamped into the open
/// unit cube. The flag reports out-of-gamut input or boundary clamping;
/// the conversion itself is total.
pub fn xyz_to_srgb_clamped(t: &Tristimulus, eps: f64) -> (UnitRgb, bool) {
    let linear = xyz_to_linear_rgb(t);
    let out_of_gamut = !linear.in_gamut();
    let [r, g, b] = linear
        .components()
        .map(|c| gamma_encode(c.clamp(0.0, 1.0)).expect("clamped into domain"));
    let (rgb, moved) = UnitRgb::clamped(r, g, b, eps);
    (rgb, out_of_gamut || moved)
}

/// Display sRGB → XYZ: transfer-function inverse, then the inverse matrix.
pub fn srgb_to_xyz(c: &UnitRgb) -> Result<Tristimulus, ColorimetryError> {
    let [r, g, b] = c
        .components()
        .map(|v| gamma_decode(v).expect("UnitRgb lies inside [0, 1]"));
    linear_rgb_to_xyz(&LinearRgb::new(r, g, b))
}
