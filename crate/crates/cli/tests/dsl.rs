use rnmrf_cli::dsl::{parse_model, print_model};
use rnmrf_core::potentials::{Helper, Potential};
use rnmrf_core::relational::ConstraintTerm;

const ROBOT: &str = r#"
# segments of a scanned room
domain length continuous [0,5]
domain depth continuous [0,1]
domain kind discrete {W,D,O}
predicate len(S:seg) -> length
predicate dep(S:seg) -> depth
predicate type(S:seg) -> kind
parfactor local: helper=CG potential=NN(layers=[64,32],clamp=[-10,10],fm=identity) atoms=[len(S),dep(S),type(S)] constraint=none
parfactor long_wall: helper=Uniform potential=MLN(w0=0.5, "len(S) > 2 => type(S) = 'W'") atoms=[len(S),type(S)] constraint=none
parfactor doors: helper=Uniform potential=MLN(w0=1, "type(S1) = 'D' => type(S2) != 'D'") atoms=[type(S1),type(S2)] constraint=S1!=S2 & nb(S1,S2)
"#;

#[test]
fn robot_map_model() {
    let m = parse_model(ROBOT).unwrap();
    assert_eq!(m.parfactors.len(), 3);
    let local = &m.parfactors[0];
    let Potential::Neural(nn) = &local.potentials[0] else { panic!() };
    assert_eq!(nn.hidden, vec![64, 32]);
    assert!(matches!(local.helper, Helper::Unfitted(_)));

    let Potential::Mln(rule) = &m.parfactors[1].potentials[0] else { panic!() };
    assert_eq!(rule.weight, 0.5);

    let doors = &m.parfactors[2];
    assert_eq!(doors.atoms.len(), 2);
    assert!(doors
        .constraint
        .iter()
        .any(|t| matches!(t, ConstraintTerm::Relation { name, .. } if name == "nb")));
    assert!(doors.constraint.iter().any(|t| matches!(t, ConstraintTerm::Neq(..))));

    let again = parse_model(&print_model(&m)).unwrap();
    assert_eq!(again, m);
}

#[test]
fn rule_with_unknown_predicate_is_rejected() {
    let bad = ROBOT.replace("len(S) > 2", "size(S) > 2");
    assert!(parse_model(&bad).is_err());
}
