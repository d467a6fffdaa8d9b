use mockrad_core::bilateral::Registry;
use mockrad_core::suites::{all_passed, run, Evidence, Expectation, Suite, SuiteOptions};

#[test]
fn quick_suites_pass() {
    let reg = Registry::builtin();
    for suite in [Suite::Watson, Suite::Forms, Suite::Klein, Suite::Order5, Suite::Order8] {
        let checks = run(suite, &reg, &SuiteOptions::default()).unwrap();
        assert!(!checks.is_empty());
        let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.line()).collect();
        assert!(failed.is_empty(), "{suite}: {failed:?}");
        assert!(all_passed(&checks));
    }
}

#[test]
fn watson_holds_the_four_relations() {
    let reg = Registry::builtin();
    let checks = run(Suite::Watson, &reg, &SuiteOptions::default()).unwrap();
    for id in ["C1", "C2", "C3", "C4"] {
        let c = checks.iter().find(|c| c.id == id).unwrap_or_else(|| panic!("no {id}"));
        assert_eq!(c.expectation, Expectation::Holds);
        match &c.evidence {
            Evidence::Exact(r) => assert!(r.verified_order >= 200),
            other => panic!("{id}: {other:?}"),
        }
    }
}

#[test]
fn misprints_are_reported_as_mismatches() {
    let reg = Registry::builtin();
    let checks = run(Suite::Order5, &reg, &SuiteOptions::default()).unwrap();
    let misprints: Vec<_> = checks.iter().filter(|c| c.expectation == Expectation::KnownMisprint).collect();
    assert!(!misprints.is_empty());
    for c in misprints {
        assert!(c.passed);
        assert!(c.line().contains("mismatch at"), "{}", c.line());
    }
}

#[test]
fn injected_faults_fail_loudly() {
    let reg = Registry::builtin();
    let opts = SuiteOptions { inject_fault: true, ..SuiteOptions::default() };
    for suite in [Suite::Watson, Suite::Forms, Suite::Klein] {
        let checks = run(suite, &reg, &opts).unwrap();
        assert!(!all_passed(&checks), "{suite}");
        assert!(!checks[0].passed);
        assert!(checks[0].line().starts_with("FAIL"));
    }
}

#[test]
fn reports_are_deterministic() {
    let reg = Registry::builtin();
    let a = serde_json::to_string(&run(Suite::Watson, &reg, &SuiteOptions::default()).unwrap()).unwrap();
    let b = serde_json::to_string(&run(Suite::Watson, &Registry::builtin(), &SuiteOptions::default()).unwrap()).unwrap();
    assert_eq!(a, b);
}
