mod props;

const CASES: u32 = 256;

#[test]
fn resampling_partitions() {
    props::resampling_partitions(CASES).unwrap();
}

#[test]
fn stratified_cv_balance() {
    props::stratified_cv_balance(CASES).unwrap();
}

#[test]
fn threshold_rule() {
    props::threshold_rule(CASES).unwrap();
}

#[test]
fn prob_rows_sum_to_one() {
    props::prob_rows_sum_to_one(CASES).unwrap();
}

#[test]
fn acc_plus_mmce() {
    props::acc_plus_mmce(CASES).unwrap();
}

#[test]
fn auc_monotone_invariance() {
    props::auc_monotone_invariance(CASES).unwrap();
}

#[test]
fn pareto_front_oracle() {
    props::pareto_front_oracle(CASES).unwrap();
}

#[test]
fn exhaustive_featsel_optimal() {
    props::exhaustive_featsel_optimal(CASES).unwrap();
}

#[test]
fn impute_reimpute() {
    props::impute_reimpute(CASES).unwrap();
}

#[test]
fn bagging_votes() {
    props::bagging_votes(CASES).unwrap();
}

#[test]
fn smote_betweenness() {
    props::smote_betweenness(CASES).unwrap();
}

#[test]
fn hamloss_is_mean_label_mmce() {
    props::hamloss_is_mean_label_mmce(CASES).unwrap();
}

#[test]
fn mcp_nonnegative() {
    props::mcp_nonnegative(CASES).unwrap();
}
