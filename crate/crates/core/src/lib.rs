//! One-pot chemical automata simulated as semi-batch reactors.
//!
//! Three languages, three chemistries:
//!
//! * L1 (at least one `a` and one `b`): AgIO₃ precipitation, [`chem_fa`].
//! * L2 (Dyck words): malonic acid / NaOH with pH as the stack, [`chem_pda`].
//! * L3 (`aⁿbⁿcⁿ`): a Belousov–Zhabotinsky oscillator read through the
//!   redox-potential area, [`chem_tm`].
//!
//! [`formal`] holds the exact recognisers the chemistry is tested against,
//! [`reactor`] the shared feed-and-evolve engine, and [`analysis`] the
//! differential suites, recipe tuning and locus map.

pub mod analysis;
pub mod chem_fa;
pub mod chem_pda;
pub mod chem_tm;
pub mod error;
pub mod formal;
pub mod ode;
pub mod par;
pub mod reactor;
pub mod thermo;

pub use error::{Error, Result};
pub use formal::{Language, Outcome, RejectKind, Symbol, Verdict, Word};
pub use reactor::{
    run_word, simulate, Aliquot, AliquotRecipe, ChemistryModel, FeedSchedule, FeedSymbol,
    Mixture, SimSettings, Trajectory,
};
