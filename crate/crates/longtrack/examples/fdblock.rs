// temporary diagnostic: operating points with smooth clutter
use longtrack::config::RunConfig;
use longtrack::data_io::SynthSpec;
use longtrack::harness::*;
use longtrack::selfeval::{train, SelfEvalNet, TrainConfig};
use longtrack::update::UpdateMode;

fn cell(tag: &str, specs: &[(SynthSpec, u64)], maxneg: usize, net: &SelfEvalNet, base: &RunConfig) {
    let corpus: Vec<SequenceSource> = specs
        .iter()
        .map(|(sp, s)| SequenceSource::synth(format!("m{s}"), sp.clone(), *s))
        .collect();
    let mut line = format!("{tag} mn{maxneg}:");
    for mode in [UpdateMode::None, UpdateMode::Blind, UpdateMode::SimThresh, UpdateMode::SelfAware] {
        let mut cfg = base.clone();
        SearchVariant::GlobalEveryFrame.apply(&mut cfg);
        cfg.update_mode = mode;
        cfg.max_negatives = maxneg;
        let n = if mode == UpdateMode::SelfAware { Some(net) } else { None };
        let auc = mean_auc(&corpus, &cfg, n).unwrap();
        line.push_str(&format!(" {mode} {auc:.3} |"));
    }
    println!("{line}");
}

fn main() {
    let mut base = RunConfig::default();
    base.update_mode = UpdateMode::None;
    let samples = harvest_corpus_samples(&(100..106).collect::<Vec<_>>(), &base, 3).unwrap();
    let out = train(&samples, &TrainConfig { epochs: 20, ..Default::default() }, 7).unwrap();
    println!("gate val acc {:.3}", out.val_accuracy);

    let specs: Vec<(SynthSpec, u64)> = (0..8u64).map(|s| (drift_spec(s), s)).collect();
    cell("default(sim.5,dr.001)", &specs, 16, &out.net, &base);
    cell("default(sim.5,dr.001)", &specs, 64, &out.net, &base);

    let lighter: Vec<(SynthSpec, u64)> = (0..8u64)
        .map(|s| {
            let mut sp = drift_spec(s);
            sp.distractor_similarity = 0.35;
            (sp, s)
        })
        .collect();
    cell("sim.35", &lighter, 16, &out.net, &base);
}
