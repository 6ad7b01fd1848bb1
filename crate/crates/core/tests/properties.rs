use std::collections::BTreeMap;

use edge_gateway_core::adapter::{DispatchTable, InboundMessage, Dispatch};
use edge_gateway_core::context::{aggregate, AttrValue};
use edge_gateway_core::convert::{self, xml, Element, Format, Node};
use edge_gateway_core::device::{DeviceManager, SensorAgent};
use edge_gateway_core::dsl::list::{ListRegistry, ListValue};
use edge_gateway_core::dsl::{evaluate, synthesize, Registry};
use edge_gateway_core::interop::{Dialect, InteropRegistry, MessageEnvelope, MsgValue, Translator};
use edge_gateway_core::logic::{default_actuators, evaluate_rules, learn_rule, SensorKey, Trace};
use edge_gateway_core::stats::{simulate_connections, spearman, SimConfig};
use edge_gateway_core::{DslProgram, IoExample, QTable, RegistryId};
use proptest::prelude::*;

fn list_program() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(1u8..=9, 0..=2)
}

fn int_list() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-50i64..50, 1..8)
}

/// Length-then-lexicographic search written independently of the library.
fn brute_force(examples: &[IoExample<ListValue>], max_len: usize) -> Option<Vec<u8>> {
    let mut layer: Vec<Vec<u8>> = vec![vec![]];
    for len in 0..=max_len {
        for stages in &layer {
            let p = DslProgram::new(RegistryId::L, stages.clone()).unwrap();
            if examples.iter().all(|ex| evaluate(&ListRegistry, &p, &ex.input[0]).ok().as_ref() == Some(&ex.output)) {
                return Some(stages.clone());
            }
        }
        if len == max_len {
            break;
        }
        layer = layer
            .iter()
            .flat_map(|p| (1u8..=9).map(move |i| {
                let mut q = p.clone();
                q.push(i);
                q
            }))
            .collect();
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn synthesis_is_sound_and_minimal(stages in list_program(), inputs in prop::collection::vec(int_list(), 1..4)) {
        let target = DslProgram::new(RegistryId::L, stages.clone()).unwrap();
        let examples: Vec<_> = inputs
            .iter()
            .filter_map(|xs| {
                let input = ListValue::List(xs.clone());
                evaluate(&ListRegistry, &target, &input).ok().map(|out| IoExample::new(input, out))
            })
            .collect();
        prop_assume!(!examples.is_empty());
        let found = synthesize(&ListRegistry, &examples, 2, &QTable::default()).unwrap();
        for ex in &examples {
            prop_assert_eq!(&evaluate(&ListRegistry, &found.program, &ex.input[0]).unwrap(), &ex.output);
        }
        prop_assert!(found.program.len() <= stages.len());
        prop_assert_eq!(Some(found.program.stages().to_vec()), brute_force(&examples, 2));
    }

    #[test]
    fn learned_table_still_finds_a_consistent_program(xs in int_list(), warmup in list_program()) {
        let mut q = QTable::default();
        if !warmup.is_empty() {
            q.update(&DslProgram::new(RegistryId::L, warmup).unwrap(), 1.0);
        }
        let ex = IoExample::new(ListValue::List(xs.clone()), ListValue::Int(*xs.iter().max().unwrap()));
        let found = synthesize(&ListRegistry, std::slice::from_ref(&ex), 2, &q).unwrap();
        prop_assert_eq!(evaluate(&ListRegistry, &found.program, &ex.input[0]).unwrap(), ex.output);
    }

    #[test]
    fn spearman_symmetric_and_rank_invariant(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..30)) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let Ok(rho) = spearman(&xs, &ys) else { return Ok(()) };
        prop_assert!((-1.0..=1.0).contains(&rho));
        prop_assert!((rho - spearman(&ys, &xs).unwrap()).abs() < 1e-12);
        let warped: Vec<f64> = xs.iter().map(|x| (x / 100.0).exp() + 3.0).collect();
        prop_assert!((rho - spearman(&warped, &ys).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn two_attempts_never_fail_more_than_first_attempts(rate in 0.0f64..0.9, seed in any::<u64>()) {
        let s = simulate_connections(&SimConfig { trials: 2_000, attempts: 2, failure_rate: rate, seed }).unwrap();
        prop_assert!(s.complete_failures <= s.first_attempt_failures);
        prop_assert_eq!(s.successes + s.complete_failures, s.trials);
    }

    #[test]
    fn numeric_aggregates_match_recomputation(xs in prop::collection::vec(-1e4f64..1e4, 1..40)) {
        let col: Vec<AttrValue> = xs.iter().map(|x| AttrValue::Number(*x)).collect();
        let agg = aggregate(&col).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        prop_assert_eq!(agg.count, xs.len());
        prop_assert!((agg.std - std).abs() <= 1e-9 * std.max(1.0));
        let AttrValue::Number(rep) = agg.representative else { panic!("numeric column") };
        prop_assert!((rep - mean).abs() <= 1e-9 * mean.abs().max(1.0));
    }

    #[test]
    fn dispatch_last_registration_wins(ids in prop::collection::vec((0usize..5, any::<u64>()), 1..30)) {
        let topics = ["a/1", "a/2", "b/1", "b/2", "c"];
        let mut table = DispatchTable::new();
        let mut oracle = BTreeMap::new();
        for (t, sa) in &ids {
            table.register(topics[*t], *sa);
            oracle.insert(topics[*t], *sa);
        }
        prop_assert_eq!(table.len(), oracle.len());
        for (t, sa) in &oracle {
            match table.dispatch(0, InboundMessage::new(t, b"1"), 0) {
                Ok(Dispatch::Delivered(got)) => prop_assert_eq!(got, *sa),
                other => prop_assert!(false, "unexpected {:?}", other),
            }
        }
    }

    #[test]
    fn clusters_partition_the_agents(agents in prop::collection::vec((0u64..40, prop::collection::vec(0i64..5, 1..5)), 0..60)) {
        let mut dm = DeviceManager::default();
        dm.load_program(DslProgram::parse("L: 1").unwrap()).unwrap();
        let mut last = BTreeMap::new();
        for (id, attributes) in agents {
            let sa = SensorAgent { id, attributes: attributes.clone(), resource_id: format!("r/{id}"), location: "r".into(), last_active: 0 };
            dm.insert(sa).unwrap();
            last.insert(id, attributes[0]);
        }
        prop_assert_eq!(dm.len(), last.len());
        let mut seen = BTreeMap::new();
        for (cluster, members) in dm.clusters() {
            prop_assert!(!members.is_empty());
            for m in members {
                prop_assert_eq!(cluster, m.attributes[0]);
                prop_assert!(seen.insert(m.id, cluster).is_none());
            }
        }
        prop_assert_eq!(seen, last);
    }

    #[test]
    fn heater_and_cooler_never_both_on(p in 0.0f64..3000.0, t in 5.0f64..40.0) {
        let (pos, temp) = (SensorKey::new("phone", "pos"), SensorKey::new("living_room", "temp"));
        let acts = default_actuators();
        let heat = learn_rule(&Trace { indep_start: 1000.0, indep_end: 0.0, dep_start: 17.0, dep_goal: 21.0 }, &acts, pos.clone(), temp.clone()).unwrap();
        let cool = learn_rule(&Trace { indep_start: 1000.0, indep_end: 0.0, dep_start: 25.0, dep_goal: 21.0 }, &acts, pos.clone(), temp.clone()).unwrap();
        let readings = BTreeMap::from([(pos, p), (temp, t)]);
        let state = evaluate_rules(&[heat, cool], &acts, &readings).unwrap();
        prop_assert!(!(state.get("heater").unwrap() && state.get("cooler").unwrap()));
    }

    #[test]
    fn envelope_survives_every_dialect(env in envelope()) {
        for shape in [env.to_paho(), env.to_gmqtt(), env.to_standard()] {
            let back = MessageEnvelope::decode(&shape).unwrap();
            prop_assert_eq!(&back.topic, &env.topic);
            prop_assert_eq!(back.mid, env.mid);
            prop_assert_eq!(back.qos, env.qos);
            prop_assert_eq!(&back.properties, &env.properties);
        }
    }

    #[test]
    fn translation_preserves_header_and_payload(env in envelope()) {
        let mut tr = Translator::new();
        tr.insert(edge_gateway_core::interop::TranslationProgram {
            source: Dialect::Gmqtt,
            target: Dialect::Paho,
            program: DslProgram::parse("I: 4").unwrap(),
        });
        let out = tr.translate(&env.to_gmqtt(), Dialect::Gmqtt, Dialect::Paho).unwrap();
        let back = MessageEnvelope::decode(&out).unwrap();
        prop_assert_eq!(&back.topic, &env.topic);
        prop_assert_eq!(back.mid, env.mid);
        prop_assert_eq!(&back.payload_parts, &env.payload_parts);
        prop_assert_eq!(&back.properties, &env.properties);
        prop_assert_eq!(tr.translate(&out, Dialect::Paho, Dialect::Paho).unwrap(), out);
    }

    #[test]
    fn xml_json_round_trip(root in element(3)) {
        let xml_text = xml::to_string(&root);
        let json = convert::xml_to_json(&xml_text).unwrap();
        prop_assert_eq!(convert::json_to_xml(&json).unwrap(), xml_text.clone());
        prop_assert_eq!(convert::convert(&json, Format::Json, Format::Xml).unwrap(), xml_text);
        prop_assert_eq!(convert::xml_to_json(&convert::json_to_xml(&json).unwrap()).unwrap(), json);
    }
}

fn envelope() -> impl Strategy<Value = MessageEnvelope> {
    (
        "[a-z]{1,6}(/[a-z0-9]{1,4}){0,3}",
        0u8..=2,
        0i64..65_536,
        prop::collection::vec("[a-z]{1,8}[0-9]", 0..4),
        prop::collection::vec(-1000i64..1000, 1..4),
    )
        .prop_map(|(topic, qos, mid, properties, parts)| {
            let mut env = MessageEnvelope::publish(&topic, qos, mid);
            env.remaining_len = parts.len() as i64;
            env.properties = properties;
            env.payload_parts =
                parts.into_iter().enumerate().map(|(n, v)| (format!("payload part {}", n + 1), MsgValue::Int(v))).collect();
            env.extras.push(("unparsed".into(), MsgValue::Str(String::new())));
            env
        })
}

fn re(pattern: &str) -> BoxedStrategy<String> {
    proptest::string::string_regex(pattern).unwrap().boxed()
}

fn text() -> BoxedStrategy<String> {
    re("[A-Za-z0-9&<>'\"]([A-Za-z0-9 .&<>]{0,10}[A-Za-z0-9&<>])?")
}

/// Trees the JSON mapping can represent without reordering: text first,
/// same-named siblings adjacent, at most one text segment.
fn element(depth: u32) -> BoxedStrategy<Element> {
    let attrs = prop::collection::btree_map(re("[a-z]{1,4}"), text(), 0..3);
    let leaf = (re("[a-z]{1,4}"), attrs.clone(), prop::option::of(text())).prop_map(|(name, attrs, t)| {
        let mut e = Element::new(&name);
        e.attributes = attrs.into_iter().collect();
        e.children.extend(t.map(Node::Text));
        e
    });
    if depth == 0 {
        return leaf.boxed();
    }
    let groups = prop::collection::btree_map(re("[a-z]{1,4}"), (1usize..3, element(depth - 1)), 0..4);
    prop_oneof![
        leaf.clone(),
        (re("[a-z]{1,4}"), attrs, prop::option::of(text()), groups).prop_map(|(name, attrs, t, groups)| {
            let mut e = Element::new(&name);
            e.attributes = attrs.into_iter().collect();
            e.children.extend(t.map(Node::Text));
            for (child_name, (count, mut child)) in groups {
                child.name = child_name;
                for _ in 0..count {
                    e.children.push(Node::Element(child.clone()));
                }
            }
            e
        }),
    ]
    .boxed()
}

#[test]
fn interop_registry_rejects_unknown_index() {
    assert!(InteropRegistry.apply(9, &MsgValue::Int(0)).is_err());
}
