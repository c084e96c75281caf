//! Compares analytic cGAN gradients with central finite differences on a
//! batch of randomly shaped small models.
//!
//!     cargo run --example gradient_check -- [instances] [seed]

use fedgan::cgan::gradient_fidelity;

fn main() -> fedgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let instances = args.next().map_or(20, |a| a.parse().expect("instances"));
    let seed = args.next().map_or(0, |a| a.parse().expect("seed"));

    let results = gradient_fidelity(instances, seed)?;
    let worst_d = results.iter().map(|r| r.d_error).fold(0.0, f64::max);
    let worst_g = results.iter().map(|r| r.g_error).fold(0.0, f64::max);
    println!("{instances} instances, seed {seed}");
    println!("  worst discriminator rel. error {worst_d:.3e}");
    println!("  worst generator     rel. error {worst_g:.3e}");
    Ok(())
}
