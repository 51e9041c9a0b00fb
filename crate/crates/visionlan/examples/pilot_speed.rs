use std::time::Instant;
use visionlan::corpus::{build_corpus, split_corpus};
use visionlan::model::{backbone::BackboneConfig, Masker, Model, ModelConfig};
use visionlan::render::RenderConfig;
use visionlan::training::{adam::Adam, compose_step_batch, train_step, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let c: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(128);
    let depth: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let batch: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(32);
    let steps: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(10);

    let cfg = ModelConfig {
        c,
        n_heads: 4,
        vsr_depth: depth,
        n_max: 12,
        image_h: 32,
        image_w: 128,
        backbone: BackboneConfig::toy(c),
        masker: Masker::Mlm,
        mask_detached: false,
            mlm_coupled: false,
    };
    let mut model = Model::<f32>::new(cfg, 0).unwrap();
    println!("params: {}", model.params.element_count(None));
    let words = build_corpus(2000, 10, 0).unwrap();
    let (train, _) = split_corpus(&words, 0.9, 0);
    let tcfg = TrainConfig { batch_size: batch, total_steps: steps.max(4) * 2, lr: 1e-4, seed: 0, ..TrainConfig::default() };
    let render_cfg = RenderConfig::default();
    let mut adam = Adam::new(&model.params, tcfg.lr);
    let mut cache = (usize::MAX, Vec::new());

    // One warmup step (thread pool spin-up)
    let b = compose_step_batch(&train, &tcfg, Masker::Mlm, 0, &mut cache).unwrap();
    train_step(&mut model, &mut adam, &tcfg, &render_cfg, &b, 0).unwrap();

    let t0 = Instant::now();
    for step in 1..=steps {
        // force LA stage costs by using a step in the LA half
        let la_step = tcfg.total_steps / 2 + step;
        let b = compose_step_batch(&train, &tcfg, Masker::Mlm, la_step, &mut cache).unwrap();
        let m = train_step(&mut model, &mut adam, &tcfg, &render_cfg, &b, la_step).unwrap();
        if step == steps { println!("last L={:.4}", m.l); }
    }
    let el = t0.elapsed().as_secs_f64();
    println!("c={c} L={depth} batch={batch}: {:.3} s/step  ({:.1} min per 1000 steps)", el / steps as f64, el / steps as f64 * 1000.0 / 60.0);
}
