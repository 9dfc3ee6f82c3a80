//! The shifting-quadratics comparison: why gradients should be kept at the
//! parameters they were computed at.
//!
//! Three quadratic losses whose minimum moves one unit per step. The policy
//! that tracks the minimum exactly beats a lagging policy on cumulative
//! loss, standard regret, and dynamic local regret — but static local
//! regret, which re-evaluates old gradients at the current parameters,
//! prefers the lagging policy. All values are exact rationals.

use timesmooth::regret::toy::toy_example;

fn main() {
    println!("Concept-drift toy comparison (losses (x-1)^2, (x-2)^2, (x-3)^2):");
    println!("  oracle policy x = (1, 2, 3)   stale policy x = (1, 3/2, 2)\n");
    print!("{}", toy_example());
}
