use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no value assigned to parameter `{0}`")]
    MissingParameter(String),

    #[error("`{0}` is not a declared parameter of the system")]
    UnknownParameter(String),

    #[error("product of two parameter-dependent polynomials is not affine in the parameters")]
    NonAffineProduct,

    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("system is not of Liénard shape: {0}")]
    NotLienardShape(String),

    #[error("polynomial still depends on parameters {0:?}")]
    FreeParameters(Vec<String>),

    #[error("determinant for `{param}` is not sign-semidefinite (verdict {verdict})")]
    NotRotationParameter { param: String, verdict: String },

    #[error("equilibrium isolation failed: {boxes} candidate boxes remain at the finest resolution")]
    RegionTooCoarse { boxes: usize },

    #[error("top-degree form x*Q_top - y*P_top vanishes identically")]
    ZeroTopForm,

    #[error("invalid section: {0}")]
    InvalidSection(String),

    #[error("step size underflow at t = {t:e}, state ({x:e}, {y:e}); the problem looks stiff")]
    StepUnderflow { t: f64, x: f64, y: f64 },

    #[error("point {index} lies within {distance:e} of the orbit")]
    PointOnOrbit { index: usize, distance: f64 },

    #[error("orbit polyline is not closed (gap {gap:e})")]
    OrbitNotClosed { gap: f64 },

    #[error("winding sum {value} is not within 0.1 of an integer")]
    WindingNotInteger { value: f64 },

    #[error("equilibrium is not a fine focus (trace {trace:e})")]
    NotFineFocus { trace: f64 },

    #[error("equilibria collide while scanning `{param}` near {value}")]
    EquilibriumCollision { param: String, value: f64 },

    #[error("seed cycle at s = {expected} could not be re-verified (found {found:?})")]
    SeedNotVerified { expected: f64, found: Option<f64> },

    #[error("fold bracket is not valid: cycle counts {lower} and {upper} do not differ by 2")]
    NotBracketed { lower: usize, upper: usize },

    #[error("continuation of `{param}` stalled at {value} without an identifiable event")]
    ContinuationStalled { param: String, value: f64 },

    #[error("search budget exhausted after {attempts} attempts; best count {best}")]
    BudgetExhausted { attempts: usize, best: usize },

    #[error("system description, line {line}: {message}")]
    Description { line: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),
}
