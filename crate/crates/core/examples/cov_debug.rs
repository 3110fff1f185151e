use vbsim::ion::{IonBeam, TargetMaterial, TransportConfig, simulate_range};

fn stats(h: &vbsim::ion::DepthHistogram) -> (f64, f64) {
    let total: u64 = h.counts.iter().sum();
    let mut cum = 0u64;
    let mut median = 0.0;
    let mut mean = 0.0;
    for (i, &c) in h.counts.iter().enumerate() {
        mean += h.bin_center_nm(i) * c as f64;
        if cum < total / 2 && cum + c >= total / 2 {
            median = h.bin_center_nm(i);
        }
        cum += c;
    }
    (mean / total as f64, median)
}

fn main() {
    let t = TargetMaterial::hbn();
    for seed in [5u64, 11, 23] {
        for (e, pub_nm) in [(300.0, 3.5), (600.0, 6.4), (1500.0, 15.0), (2500.0, 25.0)] {
            let cfg = TransportConfig { n_ions: 60_000, seed, ..TransportConfig::default() };
            let res = simulate_range(&IonBeam::helium(e), &t, &cfg).unwrap();
            let m = res.implanted.most_probable_depth_nm().unwrap();
            let (mean, med) = stats(&res.implanted);
            println!("seed {seed} {e:>6} eV: mode {m:>5.2} mean {mean:>5.2} median {med:>5.2}  (pub {pub_nm})");
        }
    }
}
