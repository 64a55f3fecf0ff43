//! Score a detector on a hand-made fixture at one threshold, then sweep.

use orbitforge::evaluation::{
    default_grid, evaluate, format_table, sweep_threshold, Detection, GroundTruth, DEFAULT_IOU_THRESHOLD,
};

fn gt(id: &str, bbox: Option<[f64; 4]>) -> GroundTruth {
    GroundTruth { image_id: id.into(), present: bbox.is_some(), bbox }
}

fn det(id: &str, bbox: [f64; 4], confidence: f64) -> Detection {
    Detection { image_id: id.into(), bbox, confidence }
}

fn main() -> orbitforge::Result<()> {
    let truth = [
        gt("a", Some([10.0, 10.0, 50.0, 50.0])),
        gt("b", Some([20.0, 20.0, 60.0, 80.0])),
        gt("c", Some([0.0, 0.0, 30.0, 30.0])),
        gt("d", None),
        gt("e", None),
    ];
    let detections = [
        det("a", [11.0, 10.0, 50.0, 51.0], 0.92),
        det("a", [200.0, 200.0, 220.0, 220.0], 0.30),
        det("b", [20.0, 40.0, 60.0, 100.0], 0.81),
        det("c", [1.0, 0.0, 30.0, 29.0], 0.45),
        det("d", [5.0, 5.0, 15.0, 15.0], 0.35),
    ];

    let report = evaluate(&truth, &detections, 0.5, DEFAULT_IOU_THRESHOLD)?;
    print!("{}", format_table(&report));

    let sweep = sweep_threshold(&truth, &detections, DEFAULT_IOU_THRESHOLD, &default_grid())?;
    println!("\nbest threshold {:.2} (accuracy {:.2})", sweep.best_threshold, sweep.best.accuracy);
    for r in sweep.curve.iter().step_by(4) {
        println!("  {:.2}  accuracy {:.2}", r.confidence_threshold, r.accuracy);
    }
    Ok(())
}
