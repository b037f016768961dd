#[test]
fn dbg_tail() {
    use pathwise::simulate::*;
    use pathwise::tailbounds::TailEnvelope;
    let v = binomial_upper_confidence(0, 1000, 1e-3).unwrap();
    let expect = 1.0 - (1e-3f64).powf(1.0/1000.0);
    println!("CP(0,1000): {v:.15e} vs exact {expect:.15e} diff {:.3e}", (v-expect).abs());
    let values = vec![10.0; 100];
    let env = TailEnvelope::UniformType { n: 4 };
    let table = tail_vs_envelope(&values, &env, &[0.1, 0.2], 1e-2).unwrap();
    for r in &table.rows {
        println!("u={} env={} est={} upper={} pass={}", r.u, r.envelope, r.estimate, r.upper_confidence, r.pass);
    }
}
