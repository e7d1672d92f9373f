//! Quick GEMM throughput check for the shapes the training loop produces.

use radar_repr::nn::kernels::matmul;
use std::time::Instant;

fn bench(m: usize, k: usize, n: usize, reps: usize) {
    let a = vec![1.0f32; m * k];
    let b = vec![1.0f32; k * n];
    let mut c = vec![0.0f32; m * n];
    matmul(&a, &b, &mut c, m, k, n, false);
    let t = Instant::now();
    for _ in 0..reps {
        matmul(&a, &b, &mut c, m, k, n, false);
    }
    let dt = t.elapsed().as_secs_f64() / reps as f64;
    let gf = 2.0 * (m * k * n) as f64 / dt / 1e9;
    println!("m={m:6} k={k:5} n={n:5}  {:8.3} ms  {gf:7.2} GFLOP/s", dt * 1e3);
    std::hint::black_box(&c);
}

fn main() {
    bench(16384, 144, 16, 20); // dec conv @128 per sample
    bench(4096, 288, 16, 50);  // dec conv @64
    bench(1024, 288, 32, 100); // dec conv @32
    bench(256, 576, 32, 200);  // dec conv @16
    bench(16384, 144, 1, 20);  // final head conv
    bench(64, 1536, 512, 100); // chirp conv2 per sample
    bench(8, 2048, 1024, 100); // enc fc1 (chunk of 8)
    bench(8, 1024, 4096, 100); // dec fc2 (chunk of 8)
    bench(4096, 9, 16, 50);    // enc conv1 (thin K)
}
