use visionlan::corpus::{build_corpus, split_corpus};
use visionlan::eval::{build_eval_set, evaluate};
use visionlan::model::{backbone::BackboneConfig, Masker, Model, ModelConfig};
use visionlan::render::RenderConfig;
use visionlan::training::{adam::Adam, compose_step_batch, train_step, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let c: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(64);
    let depth: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let steps: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(800);
    let batch: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(32);

    let mcfg = ModelConfig {
        c, n_heads: 4, vsr_depth: depth, n_max: 12,
        image_h: 32, image_w: 128,
        backbone: BackboneConfig::toy(c),
        masker: Masker::Mlm, mask_detached: false,
            mlm_coupled: false,
    };
    let mut model = Model::<f32>::new(mcfg, 0).unwrap();
    eprintln!("params {}", model.params.element_count(None));
    let words = build_corpus(2000, 10, 0).unwrap();
    let (train, test) = split_corpus(&words, 0.9, 0);
    let tcfg = TrainConfig { batch_size: batch, total_steps: steps, lr, seed: 0, ..TrainConfig::default() };
    let render_cfg = RenderConfig::default();
    let eval_words: Vec<String> = test.iter().take(100).cloned().collect();
    let eval_set = build_eval_set(&eval_words, &render_cfg, 999).unwrap();

    let mut adam = Adam::new(&model.params, tcfg.lr);
    let mut cache = (usize::MAX, Vec::new());
    let t0 = std::time::Instant::now();
    for step in 0..steps {
        let b = compose_step_batch(&train, &tcfg, Masker::Mlm, step, &mut cache).unwrap();
        let m = train_step(&mut model, &mut adam, &tcfg, &render_cfg, &b, step).unwrap();
        if (step + 1) % 100 == 0 {
            let rep = evaluate(&model, &eval_set, "probe").unwrap();
            eprintln!(
                "step {:>5} [{}] L={:.3} rec={:.3} mas={:.3} rem={:.3} | clean {:.1}% weak {:.1}% heavy {:.1}% | {:.0}s",
                step + 1, m.stage.as_str(), m.l, m.l_rec, m.l_mas, m.l_rem,
                100.0 * rep.clean_accuracy, 100.0 * rep.weak_accuracy, 100.0 * rep.heavy_accuracy,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
