#![cfg(feature = "parallel")]

use u2flow::flow::{self, FlowConfig, FlowState, RegridSettings};
use u2flow::io;
use u2flow::reference::TaubBolt;

fn run_on(threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let p = TaubBolt::new(1.0).unwrap().profile(1500, 30.0).unwrap();
        let fc = FlowConfig {
            t_end: 0.5,
            record_every: 25,
            stop_at_blowup: false,
            regrid: Some(RegridSettings::default()),
            ..FlowConfig::default()
        };
        let mut st = FlowState::new(p, &fc).unwrap();
        flow::run(&mut st, &fc).unwrap();
        io::encode_checkpoint(&st)
    })
}

#[test]
fn flow_is_bit_identical_across_thread_counts() {
    let one = run_on(1);
    assert_eq!(one, run_on(4));
    assert_eq!(one, run_on(3));
}
