//! Knowledge-base quotient masks, secret axiom capsules and K_B evaluation.

pub mod capsule;
pub mod epistemic;
pub mod logic;
pub mod terms;

pub use capsule::{capsule_apply, capsule_make, capsule_open, Capsule, CAPSULE_KRAUS};
pub use epistemic::{knows_eval, knows_pair, mask_combine, read_bits, CombinedWorld, EpistemicWorld, Knowledge, Verdict, PAD_PREDICATE};
pub use logic::{forward_chain, kb_mask, parse_kb, Axiom, AxiomKind, KBMask, Prop, PropLayout};
pub use terms::{group_rewrites, parse_rewrites, parse_term, rewrite_once, term_quotient, term_quotient_trace, Rewrite, Term};
