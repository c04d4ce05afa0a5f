use narlab_bench::{instances, Workload};
use narlab_core::model::run_batch;
use narlab_core::{ProcessorConfig, TaskId};

#[test]
fn workloads_run_forward_and_backward() {
    for p in [ProcessorConfig::Mpnn, ProcessorConfig::Twl, ProcessorConfig::HYBRID_SIGMOID] {
        let w = Workload::new(TaskId::Bfs, p, 8, 2, 8, 2).unwrap();
        assert_eq!(w.batch.num_graphs(), 2);
        assert_eq!(w.batch.num_nodes(), 16);
        assert_eq!(w.batch.line.is_some(), p.needs_line_graph());
        let r = run_batch(&w.model.config, &w.model.params, &w.batch, true).unwrap();
        assert!(r.loss.is_finite());
        assert_eq!(r.grads.unwrap().len(), w.model.params.len());
    }
}

#[test]
fn instances_are_regular_and_seeded() {
    let a = instances(TaskId::Dfs, 10, 3, 5).unwrap();
    assert_eq!(a, instances(TaskId::Dfs, 10, 3, 5).unwrap());
    assert!(a.iter().all(|i| i.graph.degrees().iter().all(|&d| d == 4)));
}
