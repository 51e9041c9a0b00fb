use std::time::Instant;
use visionlan::model::{backbone::BackboneConfig, Masker, Model, ModelConfig};
use visionlan::render::{render_word, RenderConfig};
use visionlan::tape::Tape;
use visionlan::tensor::Tensor;

fn main() {
    let cfg = ModelConfig {
        c: 128, n_heads: 4, vsr_depth: 3, n_max: 12,
        image_h: 32, image_w: 128,
        backbone: BackboneConfig::toy(128),
        masker: Masker::Mlm, mask_detached: false,
            mlm_coupled: false,
    };
    let model = Model::<f32>::new(cfg, 0).unwrap();
    let render_cfg = RenderConfig::default();
    let sample = render_word("housework", &render_cfg, 3).unwrap();
    let reps = 5;

    // backbone forward only
    let t = Instant::now();
    for _ in 0..reps {
        let mut tape = Tape::new(&model.params);
        let x = tape.constant(sample.image.clone().reshaped(vec![1,32,128]).unwrap());
        let fm = model.ids.backbone.forward(&mut tape, x).unwrap();
        let flat = tape.chw_to_hwc(fm).unwrap();
        std::hint::black_box(tape.value(flat).data()[0]);
    }
    println!("backbone fwd: {:.1} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);

    // backbone fwd + bwd
    let t = Instant::now();
    for _ in 0..reps {
        let mut tape = Tape::new(&model.params);
        let x = tape.constant(sample.image.clone().reshaped(vec![1,32,128]).unwrap());
        let fm = model.ids.backbone.forward(&mut tape, x).unwrap();
        let flat = tape.chw_to_hwc(fm).unwrap();
        let s = tape.sum_all(flat);
        let g = tape.backward(s).unwrap();
        std::hint::black_box(g.len());
    }
    println!("backbone fwd+bwd: {:.1} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);

    // full recognize (fwd only)
    let t = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(model.recognize_image(&sample.image).unwrap().text);
    }
    println!("recognize fwd: {:.1} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);

    // one vsr stack fwd+bwd on feature-sized input
    let t = Instant::now();
    for _ in 0..reps {
        let mut tape = Tape::new(&model.params);
        let v = tape.constant(Tensor::from_fn(vec![64,128], |i| (i as f32*0.01).sin()));
        let pe = tape.constant(model.spatial_pe.clone());
        let r = model.ids.vrm.vsr_forward_t(&mut tape, v, pe).unwrap();
        let out = visionlan::model::attention::pp_forward(&mut tape, r, &model.ids.vrm.pp).unwrap();
        let l = tape.seq_cross_entropy(out.logits, &[0,1,2,36,36,36,36,36,36,36,36,36], 4).unwrap();
        let g = tape.backward(l).unwrap();
        std::hint::black_box(g.len());
    }
    println!("vsr(3)+pp fwd+bwd: {:.1} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);
}
