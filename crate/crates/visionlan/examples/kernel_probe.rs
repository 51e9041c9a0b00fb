use std::time::Instant;
use visionlan::ops::kernels;

fn concrete_matmul(a: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..m {
        let or = &mut out[i * n..(i + 1) * n];
        let ar = &a[i * k..(i + 1) * k];
        for (kk, &av) in ar.iter().enumerate() {
            let br = &b[kk * n..kk * n + n];
            for (o, &bv) in or.iter_mut().zip(br.iter()) {
                *o += av * bv;
            }
        }
    }
}

fn main() {
    let (m, k, n) = (64usize, 128usize, 512usize);
    let a: Vec<f32> = (0..m * k).map(|i| (i as f32 * 0.13).sin()).collect();
    let b: Vec<f32> = (0..k * n).map(|i| (i as f32 * 0.07).cos()).collect();
    let mut o = vec![0.0f32; m * n];
    let reps = 500;

    let t = Instant::now();
    for _ in 0..reps { concrete_matmul(&a, &b, &mut o, m, k, n); }
    let el = t.elapsed().as_secs_f64();
    println!("concrete: {:.2} GMAC/s (sink {})", (reps * m * k * n) as f64 / el / 1e9, o[0]);

    let t = Instant::now();
    for _ in 0..reps { kernels::matmul(&a, &b, &mut o, m, k, n); }
    let el = t.elapsed().as_secs_f64();
    println!("generic:  {:.2} GMAC/s (sink {})", (reps * m * k * n) as f64 / el / 1e9, o[0]);

    // tanh throughput
    let xs: Vec<f32> = (0..1_000_000).map(|i| (i as f32 * 0.001).sin()).collect();
    let t = Instant::now();
    let mut acc = 0f32;
    for &x in &xs { acc += x.tanh(); }
    let el = t.elapsed().as_secs_f64();
    println!("tanh: {:.1} M/s (sink {acc})", 1.0 / el / 1e6);
}
