use shakingbot::bag::{new_bag, Vec3};
use shakingbot::config::Config;
use shakingbot::perception::{hsv_autolabel, oracle_masks, render_topdown, Camera};

fn iou(p: &[bool], t: &[bool]) -> (f64, usize, usize) {
    let inter = p.iter().zip(t).filter(|(&a, &b)| a && b).count();
    let uni = p.iter().zip(t).filter(|(&a, &b)| a || b).count();
    let np = p.iter().filter(|&&a| a).count();
    let nt = t.iter().filter(|&&a| a).count();
    ((inter as f64) / (uni.max(1) as f64), np, nt)
}

fn main() -> shakingbot::Result<()> {
    let cfg = Config::default();
    let cam = Camera::from_config(&cfg.perception);
    let c = cfg.workspace.center();
    let mut state = new_bag(&cfg.bag, 0)?;
    state.translate(Vec3::new(c[0], c[1], 0.0));
    let obs = render_topdown(&state, &cam, true);
    let pred = hsv_autolabel(&obs.rgb);
    let truth = oracle_masks(&state, &cam);
    let (hi, hp, ht) = iou(&pred.handle.data, &truth.handle.data);
    let (ri, rp, rt) = iou(&pred.rim.data, &truth.rim.data);
    println!("handle IoU {hi:.3} pred {hp} truth {ht}");
    println!("rim    IoU {ri:.3} pred {rp} truth {rt}");
    Ok(())
}
