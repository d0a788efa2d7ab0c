//! Experience-replay workbench: a FIFO transition buffer, the replay samplers
//! (uniform, reverse, top-TD, proportional-prioritized and introspective),
//! the TD-error importance score, two small environments, a tabular learner
//! and a DQN over a hand-rolled MLP, plus the experiment harness and the
//! evaluation metrics used to compare samplers.

/// `as_str`, `Display` and case-insensitive `FromStr` for a fieldless enum.
macro_rules! text_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $ty {
            type Err = $crate::Error;

            fn from_str(s: &str) -> $crate::Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok(Self::$variant),)+
                    other => Err($crate::Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"), other
                    ))),
                }
            }
        }
    };
}

pub mod agents;
pub mod envs;
pub mod error;
pub mod harness;
pub mod importance;
pub mod metrics;
pub mod replay;
pub mod samplers;

pub use error::{Error, Result};

/// Seeded generator used everywhere randomness is needed. ChaCha is
/// platform-independent, which keeps runs reproducible across machines.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
