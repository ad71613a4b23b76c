use relaxlearn::data_gen::{gen_regular_decodable, gen_subspace};
use relaxlearn::spectral::{
    factorize, fw_nonsmooth, objective_value, sign_invariant_error, spectral_decode, spectral_encode, FwOptions,
};

#[test]
fn best_objective_nonincreasing_in_steps() {
    let (data, _) = gen_regular_decodable(8, 2, 200, 0.0, 1.0, 4).unwrap();
    let objs: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&steps| fw_nonsmooth(&data, &FwOptions { radius: 2.0, steps, ..FwOptions::default() }).unwrap().objective)
        .collect();
    for w in objs.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{objs:?}");
    }
}

#[test]
fn trained_pair_reconstructs_planted_data() {
    let (data, planted) = gen_regular_decodable(6, 3, 120, 0.0, 1.0, 9).unwrap();
    assert!(objective_value(&planted, &data).unwrap() < 1e-12);
    let res = fw_nonsmooth(&data, &FwOptions { radius: 3.0, steps: 300, ..FwOptions::default() }).unwrap();
    let f = factorize(&res.model, usize::MAX);
    for x in &data.samples {
        let xhat = spectral_decode(&f, &spectral_encode(&f, x).unwrap()).unwrap();
        assert!(sign_invariant_error(xhat.as_slice(), x) < 0.05);
    }
}

#[test]
fn off_model_data_keeps_objective_below_one() {
    let (data, _) = gen_subspace(4, 4, 80, 0.0, 3).unwrap();
    let res = fw_nonsmooth(&data, &FwOptions { radius: 2.0, steps: 100, ..FwOptions::default() }).unwrap();
    assert!(res.objective < 1.0);
    assert!(res.model.total_weight() <= 2.0 + 1e-8);
}
