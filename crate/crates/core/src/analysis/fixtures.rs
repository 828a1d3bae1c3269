//! Recorded constants for the explicit versions of asymptotic statements.
//! Changing one of these changes what the checks accept, not how values are
//! computed.

/// `-ln P_P(x) - θ_P(x) >= -PROD_BOUND_FACTOR · (ln x)^2`.
pub const PROD_BOUND_FACTOR: i64 = 3;

/// Exponent constant in the check `P_P(1/r) <= r^{c (1/r) / ln(1/r)}`.
pub const PP_DECAY_CONSTANT: (i64, i64) = (1, 2);

/// Radii used by the decay check.
pub const PP_DECAY_RADII: [(i64, i64); 3] = [(1, 10), (1, 100), (1, 1000)];

/// `s = MASS_EXPONENT_FRACTION · hausdorff_lower(β0)` in the mass check.
pub const MASS_EXPONENT_FRACTION: (i64, i64) = (9, 10);

/// Allowed drop of the dimension bound when β is halved.
pub const HALVING_TOLERANCE: (i64, i64) = (1, 5);

/// Fixed β and largest truncation of the all-primes sweep.
pub const TRUNCATION_BETA: (i64, i64) = (1, 210);
pub const TRUNCATION_MAX: usize = 6;

/// Smallest β accepted by the brute-force packing count.
pub const BRUTE_MIN_BETA: (i64, i64) = (1, 24);

/// Brute-force packing count for β = 1/6 over {2,3} at each constraining
/// place, frozen from an exhaustive run.
pub const BRUTE_ANCHOR_SIXTH: [u64; 3] = [288, 252, 256];

/// Node budget of the F* tree.
pub const FSTAR_MAX_NODES: usize = 100_000;
