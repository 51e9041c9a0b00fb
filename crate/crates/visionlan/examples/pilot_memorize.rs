use visionlan::corpus::build_corpus;
use visionlan::eval::{build_eval_set, evaluate};
use visionlan::model::{backbone::BackboneConfig, Masker, Model, ModelConfig};
use visionlan::render::RenderConfig;
use visionlan::training::{adam::Adam, compose_step_batch, train_step, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let n_words: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(50);
    let steps: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(400);
    let depth: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(2);
    let masker = match args.get(5).map(|s| s.as_str()).unwrap_or("mlm") {
        "none" => Masker::None,
        _ => Masker::Mlm,
    };
    let fixed_n: bool = args.get(6).map(|s| s == "fixed").unwrap_or(false);
    let lambda: f32 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(0.5);

    let mcfg = ModelConfig {
        c: 64,
        n_heads: 4,
        vsr_depth: depth,
        n_max: 12,
        image_h: 32,
        image_w: 128,
        backbone: BackboneConfig::toy(64),
        masker,
        mask_detached: false,
            mlm_coupled: false,
    };
    let mut model = Model::<f32>::new(mcfg, 0).unwrap();
    let words: Vec<String> = build_corpus(2000, 10, 0)
        .unwrap()
        .into_iter()
        .take(n_words)
        .collect();
    let render_cfg = RenderConfig::plain(32, 128, 12);
    let tcfg = TrainConfig {
        batch_size: 32,
        total_steps: steps,
        lr,
        seed: 0,
        fixed_n_loss: fixed_n,
        lambda1: lambda,
        lambda2: lambda,
        ..TrainConfig::default()
    };
    let eval_set = build_eval_set(&words, &render_cfg, 999).unwrap();

    let mut adam = Adam::new(&model.params, tcfg.lr);
    let mut cache = (usize::MAX, Vec::new());
    for step in 0..steps {
        let b = compose_step_batch(&words, &tcfg, masker, step, &mut cache).unwrap();
        let m = train_step(&mut model, &mut adam, &tcfg, &render_cfg, &b, step).unwrap();
        if (step + 1) % 50 == 0 {
            let rep = evaluate(&model, &eval_set, "probe").unwrap();
            let rec = model.recognize_image(&eval_set[0].clean.image).unwrap();
            eprintln!(
                "step {:>4} [{}] L={:.3} rec={:.3} | train-word acc clean {:.1}% | '{}'->'{}'",
                step + 1,
                m.stage.as_str(),
                m.l,
                m.l_rec,
                100.0 * rep.clean_accuracy,
                eval_set[0].clean.text,
                rec.text
            );
            // Attention diagnostics: per decode step, argmax position and mass.
            let (hw, n) = (rec.att.shape()[0], rec.att.shape()[1]);
            let mut diag = String::new();
            for t in 0..n.min(7) {
                let mut best = 0;
                let mut best_v = f32::MIN;
                for s in 0..hw {
                    let v = rec.att.data()[s * n + t];
                    if v > best_v {
                        best_v = v;
                        best = s;
                    }
                }
                diag.push_str(&format!("t{t}:x{}@{:.2} ", best % 16, best_v));
            }
            eprintln!("        att: {diag}");
        }
    }
}
