fn main() {
    let x: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1_000_000_000);
    let t = std::time::Instant::now();
    println!("pi({x}) = {} in {:?}", primerace::sieve::pi_of(x), t.elapsed());
}
