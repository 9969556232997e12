//! Several target images, each driving a different region of one source.

use std::collections::BTreeMap;

use chromaflow::pipeline::{self, PipelineConfig, TransferJob};
use chromaflow::regions::{rasterize_closed_path, Correspondence, CorrespondenceSet};
use chromaflow::{io, synth, RegionMask};

fn main() -> chromaflow::Result<()> {
    let out_dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, Into::into);
    let (w, h) = (160, 120);
    let source = synth::scene(w, h, 9);
    let sunset = synth::noisy_patch(64, 48, [230, 120, 60], 12, 1);
    let forest = synth::noisy_patch(30, 30, [40, 110, 50], 12, 2);
    let everything = |img: &chromaflow::RgbImage| RegionMask::rect(img.width(), img.height(), 0, 0, img.width(), img.height());

    let top = rasterize_closed_path(&synth::ellipse_path(80.0, 25.0, 60.0, 18.0, 48), w, h)?;
    let bottom = rasterize_closed_path(&synth::ellipse_path(80.0, 95.0, 60.0, 18.0, 48), w, h)?;
    let job = TransferJob {
        targets: BTreeMap::from([("sunset".to_string(), sunset.clone()), ("forest".to_string(), forest.clone())]),
        set: CorrespondenceSet::new(
            vec![
                Correspondence { source_region: top.clone(), target_id: "sunset".into(), target_region: everything(&sunset) },
                Correspondence { source_region: bottom.clone(), target_id: "forest".into(), target_region: everything(&forest) },
            ],
            vec![],
        ),
        source,
        config: PipelineConfig::default(),
    };
    let out = pipeline::run(&job)?;
    println!("{}", out.status_json());
    println!("top    {:.1?} (sunset {:.1?})", synth::region_mean_rgb(&out.image, &top), synth::region_mean_rgb(&sunset, &everything(&sunset)));
    println!("bottom {:.1?} (forest {:.1?})", synth::region_mean_rgb(&out.image, &bottom), synth::region_mean_rgb(&forest, &everything(&forest)));
    io::write_png(&out.image, out_dir.join("multi_target.png"))?;
    Ok(())
}
