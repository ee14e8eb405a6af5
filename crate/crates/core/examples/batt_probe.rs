fn main() {
    let t0 = std::time::Instant::now();
    let reports = shuffle_sgd::verify::run_battery(&shuffle_sgd::verify::BatteryConfig::default()).unwrap();
    for r in &reports { println!("{r}"); }
    println!("total {:?}", t0.elapsed());
}
