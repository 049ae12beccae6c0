use vlasov_decay::dispersion::{penrose_margin, PenroseGrid};
use vlasov_decay::equilibria::{make_equilibrium, Family};

#[test]
fn double_bump_margin_shrinks_with_separation() {
    let mut margins = Vec::new();
    for u in [0.0, 1.0, 2.0, 4.0] {
        let eq = make_equilibrium(Family::DoubleBump { separation: u, sigma: 1.0 }, 3).unwrap();
        let report = penrose_margin(&eq, &PenroseGrid::default_grid()).unwrap();
        println!("u = {u}: margin {:.6}, argmin {:?}, stable {}", report.margin, report.argmin, report.is_stable());
        margins.push(report.margin);
    }
    assert!(margins.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{margins:?}");
}
