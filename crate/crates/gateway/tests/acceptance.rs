//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use edge_gateway::config::GatewayConfig;
use edge_gateway::sim;
use edge_gateway::Daemon;
use edge_gateway_core::adapter::{Protocol, RetryPolicy};
use edge_gateway_core::context::{aggregate, learn_placement, place, AttrValue, Context, SensorObservation};
use edge_gateway_core::convert::{self, xml, ConvertError, Element, Format, Node};
use edge_gateway_core::dsl::list::{ListRegistry, ListValue, HEAD, REST};
use edge_gateway_core::dsl::Synthesizer;
use edge_gateway_core::interop::{Dialect, MessageEnvelope, MsgValue, Translator};
use edge_gateway_core::logic::{default_actuators, evaluate_rules, learn_rule, Comparison, Rule, SensorKey, Trace};
use edge_gateway_core::stats::{spearman, simulate_connections, SimConfig};
use edge_gateway_core::{IoExample, QTable, RegistryId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn neutral() -> Synthesizer {
    Synthesizer::new(QTable::default(), 4)
}

fn list_examples(rows: &[([i64; 5], i64)]) -> Vec<IoExample<ListValue>> {
    rows.iter().map(|(xs, y)| IoExample::new(ListValue::List(xs.to_vec()), ListValue::Int(*y))).collect()
}

fn by_type() -> Vec<IoExample<ListValue>> {
    list_examples(&[
        ([1, 10, 20, 5, 12], 1),
        ([2, 11, 20, 5, 7], 2),
        ([3, 12, 20, 9, 12], 3),
        ([4, 13, 20, 9, 10], 4),
        ([9, 13, 20, 9, 10], 9),
        ([9, 8, 7, 6, 5], 9),
    ])
}

fn by_id() -> Vec<IoExample<ListValue>> {
    list_examples(&[
        ([10, 1, 20, 5, 12], 1),
        ([11, 2, 20, 5, 7], 2),
        ([12, 3, 20, 9, 12], 3),
        ([13, 4, 20, 9, 10], 4),
        ([13, 9, 20, 9, 10], 9),
        ([8, 9, 7, 6, 5], 9),
    ])
}

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn paho_fixture(topic: &str, mid: i64) -> MessageEnvelope {
    let mut env = MessageEnvelope::publish(topic, 1, mid);
    env.remaining_len = 4;
    env.properties = strs(&["property1", "property2", "property3", "property4"]);
    env.payload_parts = vec![
        ("payload part 1".into(), MsgValue::Str("Payload part 1".into())),
        ("payload part 2".into(), MsgValue::Str("Payload part 2".into())),
    ];
    env.extras = vec![("format".into(), MsgValue::Int(1))];
    env
}

fn gmqtt_fixture(topic: &str, mid: i64) -> MessageEnvelope {
    let mut env = MessageEnvelope::publish(topic, 1, mid);
    env.remaining_len = 7;
    env.properties = strs(&["property1", "property2"]);
    env.payload_parts =
        vec![("payload part 1".into(), MsgValue::Int(123)), ("payload part 2".into(), MsgValue::Int(456))];
    env.extras = vec![("unparsed".into(), MsgValue::Str("property3".into()))];
    env
}

fn header(env: &MessageEnvelope) -> Vec<MsgValue> {
    vec![
        MsgValue::Str(env.command.clone()),
        MsgValue::Bool(env.dup),
        MsgValue::Int(env.qos.into()),
        MsgValue::Bool(env.retain),
        MsgValue::Int(env.remaining_len),
        MsgValue::Int(env.topic_len),
        MsgValue::Str(env.topic.clone()),
        MsgValue::Int(env.mid),
    ]
}

/// Ordered-sequence form: header, then one sequence holding the format
/// flag, the properties and the payload parts.
fn expected_sequence(env: &MessageEnvelope) -> MsgValue {
    let mut out = header(env);
    out.push(MsgValue::Seq(vec![
        MsgValue::Int(1),
        MsgValue::Seq(env.properties.iter().map(|p| MsgValue::Str(p.clone())).collect()),
        MsgValue::Seq(env.payload_parts.iter().map(|(_, v)| v.clone()).collect()),
    ]));
    MsgValue::Seq(out)
}

fn expected_record(env: &MessageEnvelope, tail: usize) -> MsgValue {
    let mut packet = header(env);
    packet.push(MsgValue::Record(env.payload_parts.clone()));
    let mut info = vec![MsgValue::Int(env.properties.len() as i64)];
    info.extend(env.properties.iter().map(|p| MsgValue::Str(p.clone())));
    MsgValue::Record(vec![
        ("command".into(), MsgValue::Str(env.command.clone())),
        ("qos".into(), MsgValue::Int(env.qos.into())),
        ("pos".into(), MsgValue::Int(0)),
        ("mid".into(), MsgValue::Int(env.mid)),
        ("info".into(), MsgValue::Seq(info)),
        ("packet".into(), MsgValue::Seq(packet)),
        ("to_process".into(), MsgValue::Int(tail as i64)),
    ])
}

type Learned = (Vec<u8>, Duration);

fn learn_translator() -> Result<(Translator, Learned, Learned), String> {
    let mut tr = Translator::new();
    let p = paho_fixture("lab/paho/0", 1);
    let p2 = paho_fixture("lab/paho/22", 77);
    let to_g = [
        IoExample::new(p.to_paho(), expected_sequence(&p)),
        IoExample::new(p2.to_paho(), expected_sequence(&p2)),
    ];
    let (pg, pg_took) = timed(|| tr.learn_translation(&mut neutral(), &to_g, Dialect::Paho, Dialect::Gmqtt));
    let pg = pg.map_err(|e| e.to_string())?;
    let g = gmqtt_fixture("lab/gmqtt/0", 2);
    let to_p = [IoExample::new(g.to_gmqtt(), expected_record(&g, 9))];
    let (gp, gp_took) = timed(|| tr.learn_translation(&mut neutral(), &to_p, Dialect::Gmqtt, Dialect::Paho));
    let gp = gp.map_err(|e| e.to_string())?;
    Ok((tr, (pg.program.stages().to_vec(), pg_took), (gp.program.stages().to_vec(), gp_took)))
}

const T00: f64 = 1_526_774_400.0;
const T10: f64 = 1_526_810_400.0;
const T18: f64 = 1_526_839_200.0;

fn obs(name: &str, loc: &str, temp: f64, time: f64) -> SensorObservation {
    SensorObservation::new(name)
        .with("loc", AttrValue::Text(loc.into()))
        .with("temp", AttrValue::Number(temp))
        .with("time", AttrValue::Time(time))
}

fn sensor101() -> SensorObservation {
    obs("sensor101", "Kista", 26.4, T10)
}

/// c1 and c2 keyed by location, c3 and c4 by time.
fn contexts() -> Vec<Context> {
    vec![
        Context::from_members("c1", "loc", &[obs("sensor1", "Kista", 20.3, T00)]).unwrap(),
        Context::from_members("c2", "loc", &[obs("sensor3", "Solna", 18.0, T00), obs("sensor4", "Solna", 19.0, T18)])
            .unwrap(),
        Context::from_members("c3", "time", &[obs("sensor1", "Kista", 20.3, T10), obs("sensor2", "Kista", 19.7, T10)])
            .unwrap(),
        Context::from_members("c4", "time", &[obs("sensor5", "Solna", 22.0, T18)]).unwrap(),
    ]
}

fn expected_loc() -> Vec<Context> {
    vec![Context::from_members("c1", "loc", &[obs("sensor1", "Kista", 20.3, T00), sensor101()]).unwrap()]
}

fn expected_time() -> Vec<Context> {
    vec![Context::from_members(
        "c3",
        "time",
        &[obs("sensor1", "Kista", 20.3, T10), obs("sensor2", "Kista", 19.7, T10), sensor101()],
    )
    .unwrap()]
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn criterion_1() -> Outcome {
    let limit = Duration::from_secs(10);
    let mut report = Vec::new();
    let mut expect = |name: &str, got: Vec<u8>, want: &[u8], took: Duration| -> Result<(), String> {
        check(got == want, format!("{name}: got {got:?}, want {want:?}"))?;
        check(took < limit, format!("{name}: took {took:?}"))?;
        report.push(format!("{name}={got:?} in {:.1}ms", took.as_secs_f64() * 1e3));
        Ok(())
    };

    let (_, (pg, pg_took), (gp, gp_took)) = learn_translator()?;
    expect("P->G", pg, &[2, 3], pg_took)?;
    expect("G->P", gp, &[4], gp_took)?;

    let (found, took) = timed(|| learn_placement(&mut neutral(), &sensor101(), &contexts(), &expected_loc()));
    expect("location", found.map_err(|e| e.to_string())?.program.stages().to_vec(), &[4, 5, 7], took)?;
    let (found, took) = timed(|| learn_placement(&mut neutral(), &sensor101(), &contexts(), &expected_time()));
    expect("time", found.map_err(|e| e.to_string())?.program.stages().to_vec(), &[1, 5, 7], took)?;

    let (found, took) = timed(|| neutral().learn(&ListRegistry, &by_type()));
    expect("by type", found.map_err(|e| e.to_string())?.program.stages().to_vec(), &[HEAD], took)?;
    let (found, took) = timed(|| neutral().learn(&ListRegistry, &by_id()));
    expect("by id", found.map_err(|e| e.to_string())?.program.stages().to_vec(), &[REST, HEAD], took)?;
    Ok(report.join(", "))
}

const SEQUENCE_OUT: &str = "('PUBLISH', False, 1, False, 4, 11, 'test/paho/1', 9012, (1, ('property1', 'property2', 'property3', 'property4'), ('Payload part 1', 'Payload part 2')))";
const RECORD_OUT: &str = "{'command': 'PUBLISH', 'qos': 1, 'pos': 0, 'mid': 3456, 'info': (2, 'property1', 'property2'), 'packet': ('PUBLISH', False, 1, False, 7, 12, 'test/gmqtt/1', 3456, {'payload part 1': 123, 'payload part 2': 456}), 'to_process': 9}";

fn criterion_2() -> Outcome {
    let (tr, _, _) = learn_translator()?;
    let p = paho_fixture("test/paho/1", 9012);
    let out = tr.translate(&p.to_paho(), Dialect::Paho, Dialect::Gmqtt).map_err(|e| e.to_string())?;
    check(out == expected_sequence(&p), "sequence output differs structurally")?;
    check(out.to_string() == SEQUENCE_OUT, format!("sequence output {out}"))?;
    let g = gmqtt_fixture("test/gmqtt/1", 3456);
    let out = tr.translate(&g.to_gmqtt(), Dialect::Gmqtt, Dialect::Paho).map_err(|e| e.to_string())?;
    check(out == expected_record(&g, 9), "record output differs structurally")?;
    check(out.to_string() == RECORD_OUT, format!("record output {out}"))?;
    Ok("both outputs equal field for field".into())
}

fn criterion_3() -> Outcome {
    let pos = SensorKey::new("phone", "pos");
    let temp = SensorKey::new("living_room", "temp");
    let acts = default_actuators();
    let heat_trace = Trace { indep_start: 1000.0, indep_end: 0.0, dep_start: 17.0, dep_goal: 21.0 };
    let cool_trace = Trace { indep_start: 1000.0, indep_end: 0.0, dep_start: 25.0, dep_goal: 21.0 };
    let heat = learn_rule(&heat_trace, &acts, pos.clone(), temp.clone()).map_err(|e| e.to_string())?;
    let cool = learn_rule(&cool_trace, &acts, pos.clone(), temp.clone()).map_err(|e| e.to_string())?;
    let same = |r: &Rule, act: u8, goal: Comparison| {
        r.actuators == [act]
            && (r.slope - 0.004).abs() <= 1e-12
            && r.reference == (1000.0, Comparison::Greater)
            && r.goal == (21.0, goal)
    };
    check(same(&heat, 1, Comparison::Less), format!("heater rule {heat}"))?;
    check(same(&cool, 3, Comparison::Greater), format!("cooler rule {cool}"))?;
    check(heat.to_string() == "((1), 0.004, (1000, '>'), (21, '<'))", heat.to_string())?;
    check(cool.to_string() == "((3), 0.004, (1000, '>'), (21, '>'))", cool.to_string())?;
    let rules = [heat, cool];
    for (p, t, want) in [
        (1500.0, 19.0, "{'heater': False, 'cooler': False}"),
        (400.0, 19.0, "{'heater': True, 'cooler': False}"),
        (0.0, 23.0, "{'heater': False, 'cooler': True}"),
    ] {
        let readings = BTreeMap::from([(pos.clone(), p), (temp.clone(), t)]);
        let state = evaluate_rules(&rules, &acts, &readings).map_err(|e| e.to_string())?;
        check(state.to_string() == want, format!("p={p} t={t}: {state}"))?;
    }
    Ok("two rules and three witness states match".into())
}

fn criterion_4() -> Outcome {
    let program = learn_placement(&mut neutral(), &sensor101(), &contexts(), &expected_loc())
        .map_err(|e| e.to_string())?
        .program;
    let placed = place(&sensor101(), &contexts(), &program).map_err(|e| e.to_string())?;
    let c1 = placed.iter().find(|c| c.id == "c1").ok_or("c1 missing")?;
    let agg = c1.aggregate("temp").ok_or("c1 has no temp")?;
    let AttrValue::Number(mean) = agg.representative else { return Err("temp mean is not numeric".into()) };
    check(agg.count == 2, format!("count {}", agg.count))?;
    check((agg.std - 3.05).abs() <= 1e-9, format!("std {}", agg.std))?;
    check((mean - 23.35).abs() <= 1e-9, format!("mean {mean}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 0..1000 {
        let len = rng.random_range(1..60);
        let xs: Vec<f64> = (0..len).map(|_| rng.random_range(-1e3..1e3)).collect();
        let time = n % 2 == 1;
        let col: Vec<AttrValue> =
            xs.iter().map(|x| if time { AttrValue::Time(T00 + x * 60.0) } else { AttrValue::Number(*x) }).collect();
        let ys: Vec<f64> = if time { xs.iter().map(|x| T00 + x * 60.0).collect() } else { xs.clone() };
        let m = ys.iter().sum::<f64>() / len as f64;
        let s = (ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / len as f64).sqrt();
        let agg = aggregate(&col).ok_or("empty aggregate")?;
        let rep = match agg.representative {
            AttrValue::Number(v) | AttrValue::Time(v) => v,
            AttrValue::Text(_) => return Err("text representative".into()),
        };
        check(agg.count == len, format!("sequence {n}: count"))?;
        check((agg.std - s).abs() <= 1e-9 * s.max(1.0), format!("sequence {n}: std {} vs {s}", agg.std))?;
        check((rep - m).abs() <= 1e-9 * m.abs().max(1.0), format!("sequence {n}: mean {rep} vs {m}"))?;
    }
    Ok(format!("c1 temp = ({}, {:.12}, {:.12}); 1000 random sequences agree", agg.count, agg.std, mean))
}

const DECL: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

fn random_element(rng: &mut ChaCha8Rng, depth: u32) -> Element {
    const NAMES: [&str; 6] = ["a", "b", "node", "item", "x1", "meta"];
    let mut e = Element::new(NAMES[rng.random_range(0..NAMES.len())]);
    for name in ["id", "kind", "unit"] {
        if rng.random_bool(0.3) {
            e.attributes.push((name.into(), format!("v{}", rng.random_range(0..100))));
        }
    }
    if rng.random_bool(0.4) {
        e.children.push(Node::Text(format!("t{} & <{}>", rng.random_range(0..50), rng.random_range(0..9))));
    }
    if depth > 0 {
        let mut used = Vec::new();
        for _ in 0..rng.random_range(0..4) {
            let child = random_element(rng, depth - 1);
            if used.contains(&child.name) {
                continue;
            }
            used.push(child.name.clone());
            for _ in 0..rng.random_range(1..3) {
                e.children.push(Node::Element(child.clone()));
            }
        }
    }
    e
}

fn criterion_5() -> Outcome {
    let rows = [
        ("<e/>", r#"{"e": null}"#),
        ("<e>text</e>", r#"{"e": "text"}"#),
        (r#"<e name="value"/>"#, r#"{"e": {"@name": "value"}}"#),
        (r#"<e name="value">text</e>"#, r##"{"e": {"@name": "value", "#text": "text"}}"##),
        ("<e><a>text</a><b>text</b></e>", r#"{"e": {"a": "text", "b": "text"}}"#),
        ("<e><a>text</a><a>text</a></e>", r#"{"e": {"a": ["text", "text"]}}"#),
        ("<e>text<a>text</a></e>", r##"{"e": {"#text": "text", "a": "text"}}"##),
    ];
    for (n, (x, j)) in rows.iter().enumerate() {
        let got = convert::xml_to_json(x).map_err(|e| format!("row {}: {e}", n + 1))?;
        check(got == *j, format!("row {} xml->json: {got}", n + 1))?;
        let got = convert::json_to_xml(j).map_err(|e| format!("row {}: {e}", n + 1))?;
        check(got == format!("{DECL}{x}"), format!("row {} json->xml: {got}", n + 1))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for n in 0..50 {
        let doc = xml::to_string(&random_element(&mut rng, 4));
        let json = convert::convert(&doc, Format::Xml, Format::Json).map_err(|e| format!("doc {n}: {e}"))?;
        let back = convert::convert(&json, Format::Json, Format::Xml).map_err(|e| format!("doc {n}: {e}"))?;
        check(back == doc, format!("doc {n} does not round trip"))?;
        check(convert::xml_to_json(&back).ok().as_deref() == Some(json.as_str()), format!("doc {n}: json drifts"))?;
    }

    let nest = |n: usize| "<a>".repeat(n) + &"</a>".repeat(n);
    check(convert::xml_to_json(&nest(1000)).is_ok(), "depth 1000 rejected")?;
    let err = convert::xml_to_json(&nest(1001));
    check(matches!(err, Err(ConvertError::DepthExceeded(1000))), format!("depth 1001 gave {err:?}"))?;
    Ok("7 rows both ways, 50 documents round trip, depth guard at 1000".into())
}

fn criterion_6() -> Outcome {
    let depth = [2.0, 2.0, 3.0, 10.0, 10.0];
    let time = [13.0, 59.0, 100.0, 154.0, 408.0];
    let lines = [32.0, 206.0, 304.0, 25.0, 57.0];
    let time2 = [34.0, 47.0, 58.0, 14.0, 18.0];
    let a = spearman(&depth, &time).map_err(|e| e.to_string())?;
    let b = spearman(&lines, &time2).map_err(|e| e.to_string())?;
    check((a - 0.949).abs() <= 0.001, format!("depth/time rho {a}"))?;
    check((b - 0.900).abs() <= 0.001, format!("lines/time rho {b}"))?;
    // 3 / sqrt(10) by hand from the average ranks.
    check((a - 0.9486832980505137).abs() < 1e-12, format!("depth/time oracle {a}"))?;
    check((b - 0.9).abs() < 1e-12, format!("lines/time oracle {b}"))?;
    Ok(format!("rho = {a:.4}, {b:.4}"))
}

fn criterion_7() -> Outcome {
    let c = sim::rank_cost(10, Duration::from_millis(350), Duration::from_millis(350)).map_err(|e| e.to_string())?;
    check(c.search_secs == 3.5, format!("model {}", c.search_secs))?;
    check(c.connect_secs == 3.5, format!("simulated {}", c.connect_secs))?;
    Ok(format!("rank 10 costs {} s", c.connect_secs))
}

fn criterion_8() -> Outcome {
    let mut report = Vec::new();
    for (protocol, rate, expected) in [(Protocol::Coap, 0.005, 5), (Protocol::Mqtt, 0.025, 25)] {
        let policy = RetryPolicy::default_for(protocol);
        let run = sim::simulate(protocol, policy, 1000, rate, 2018).map_err(|e| e.to_string())?;
        let again = sim::simulate(protocol, policy, 1000, rate, 2018).map_err(|e| e.to_string())?;
        check(run == again, format!("{protocol} run is not deterministic"))?;
        let dist = Binomial::new(rate, 1000).map_err(|e| e.to_string())?;
        let (lo, hi) = (dist.inverse_cdf(0.005), dist.inverse_cdf(0.995));
        check(lo <= expected && expected <= hi, format!("{protocol}: interval [{lo}, {hi}] misses {expected}"))?;
        let got = run.stats.first_attempt_failures;
        check((lo..=hi).contains(&got), format!("{protocol}: {got} failures outside [{lo}, {hi}]"))?;
        report.push(format!("{protocol} {got} in [{lo}, {hi}]"));

        let big = simulate_connections(&SimConfig { trials: 100_000, attempts: 2, failure_rate: rate, seed: 7 })
            .map_err(|e| e.to_string())?;
        check(
            big.complete_failures <= big.first_attempt_failures,
            format!("{protocol}: {} complete vs {} first-attempt failures", big.complete_failures, big.first_attempt_failures),
        )?;
    }
    Ok(report.join(", "))
}

fn wait_until(daemon: &Daemon, within: Duration, what: &str, mut done: impl FnMut(&edge_gateway::Snapshot) -> bool) -> Result<edge_gateway::Snapshot, String> {
    let deadline = Instant::now() + within;
    loop {
        let snap = daemon.snapshot().map_err(|e| e.to_string())?;
        if done(&snap) {
            return Ok(snap);
        }
        if Instant::now() > deadline {
            return Err(format!("timed out waiting for {what}: {snap:?}"));
        }
        std::thread::sleep(Duration::from_millis(20));
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = GatewayConfig::parse(&format!(
        "[gateway]\narchive_dir = {:?}\ntick_ms = 100\n\n[harness]\nmqtt_brokers = 1\n",
        dir.path().display().to_string()
    ))
    .map_err(|e| e.to_string())?;
    let daemon = Daemon::start(cfg).map_err(|e| e.to_string())?;
    wait_until(&daemon, Duration::from_secs(10), "session", |s| s.sessions_up >= 1)?;
    let broker = &daemon.harness().mqtt[0];
    for i in 0..100 {
        broker.publish(&format!("site/room{}/sensor{i}", i % 7), format!("[{}, {i}, 20]", i % 4).as_bytes());
    }
    let snap = wait_until(&daemon, Duration::from_secs(10), "100 agents", |s| s.agents >= 100 && s.pending == 0)?;
    let partition: usize = snap.cluster_sizes.values().sum();
    check(snap.agents == 100, format!("{} agents", snap.agents))?;
    check(snap.created == 100, format!("{} created", snap.created))?;
    check(snap.dispatch_entries == 100, format!("dispatch table holds {}", snap.dispatch_entries))?;
    check(partition == 100, format!("clusters hold {partition}"))?;
    check(snap.cluster_sizes.len() == 4, format!("cluster sizes {:?}", snap.cluster_sizes))?;
    check(snap.counters.classified == 100, format!("counters {:?}", snap.counters))?;
    check(snap.counters.malformed == 0 && snap.counters.rejected == 0, format!("counters {:?}", snap.counters))?;
    check(snap.consistent, "dispatch and agent sets disagree")?;
    daemon.shutdown().map_err(|e| e.to_string())?;
    Ok(format!("100 agents in clusters {:?}, nothing dropped", snap.cluster_sizes))
}

fn criterion_10() -> Outcome {
    let mut synth = neutral();
    let before: Vec<f64> = [REST, HEAD].iter().map(|i| synth.qtable().q(RegistryId::L, *i)).collect();
    let first = synth.learn(&ListRegistry, &by_id()).map_err(|e| e.to_string())?;
    for (n, i) in first.program.stages().iter().enumerate() {
        let after = synth.qtable().q(RegistryId::L, *i);
        check(after > before[n], format!("q of {i} went {} -> {after}", before[n]))?;
    }
    let second = synth.learn(&ListRegistry, &by_id()).map_err(|e| e.to_string())?;
    check(second.program == first.program, "repeat found another program")?;
    check(
        second.candidates_visited <= first.candidates_visited,
        format!("{} > {}", second.candidates_visited, first.candidates_visited),
    )?;
    Ok(format!("visited {} then {}", first.candidates_visited, second.candidates_visited))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("synthesis fixtures", criterion_1),
        ("translation outputs", criterion_2),
        ("logic scenarios", criterion_3),
        ("context aggregates", criterion_4),
        ("converter", criterion_5),
        ("spearman", criterion_6),
        ("rank-cost model", criterion_7),
        ("failure simulation", criterion_8),
        ("end to end", criterion_9),
        ("q-learning", criterion_10),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
