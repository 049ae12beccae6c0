use std::time::Instant;
use vlasov_decay::cli::fit::log_times;
use vlasov_decay::report::NormKind;
use vlasov_decay::transport::{free_decay_report, InitialDatum, Profile};

#[test]
fn gaussian_rates_over_long_window() {
    let f0 = InitialDatum::separable(3, 1.0, Profile::Gaussian { sigma: 1.0 }, Profile::Gaussian { sigma: 1.0 }, 2).unwrap();
    let start = Instant::now();
    let report = free_decay_report(&f0, 2, &log_times(5.0, 100.0, 20)).unwrap();
    println!("elapsed {:?}", start.elapsed());
    for k in 0..=2 {
        let a = report.fit("rho_free", k, NormKind::L1, (5.0, 100.0), false).unwrap().unwrap();
        let b = report.fit("rho_free", k, NormKind::LInf, (5.0, 100.0), false).unwrap().unwrap();
        println!("k={k} L1 {:.4} Linf {:.4}", a.exponent, b.exponent);
        assert!((a.exponent + k as f64).abs() < 0.05);
        assert!((b.exponent + 3.0 + k as f64).abs() < 0.05);
    }
}
