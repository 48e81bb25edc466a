//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero when any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ltdps::baselines::build_tm;
use ltdps::eval::{
    accuracy_percent, history_for, parse_predicted_path, path_accuracy, run_many, ExperimentConfig, PathResult, Scheme,
};
use ltdps::grid::{ApId, GridTopology, RegionId};
use ltdps::miner::{predict_next_ap, score_candidate, PatternDatabase, ScoringConfig};
use ltdps::mobility::kinematic::{
    gauss_markov_update, step_boundless, step_gauss_markov, Area, BoundlessParams, GaussMarkovParams, KinematicState,
    WalkState, WalkStateMatrix,
};
use ltdps::mobility::{MobilePath, PathStep};
use ltdps::security::{
    run_handshake, CipherKind, CleanChannel, MobileEndpoint, MsgType, ReplayStep, SecurePacket, ServerEndpoint,
    SharedKey, Verdict,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ids(v: &[ApId]) -> Vec<u16> {
    v.iter().map(|a| a.0).collect()
}

// Independent oracle: corner positions of a region on an r x c AP lattice.
fn oracle_region_aps(ap_rows: i32, ap_cols: i32, region: i32) -> Vec<u16> {
    let (i, j) = (region / (ap_cols + 1), region % (ap_cols + 1));
    let mut out = Vec::new();
    for (r, c) in [(i - 1, j - 1), (i - 1, j), (i, j - 1), (i, j)] {
        if (0..ap_rows).contains(&r) && (0..ap_cols).contains(&c) {
            out.push((r * ap_cols + c) as u16);
        }
    }
    out.sort_unstable();
    out
}

fn criterion_grid() -> Outcome {
    let start = Instant::now();
    let grid = GridTopology::default();

    // Rows as printed; the corner row for region 5 is printed as {5}.
    let printed: [(u16, &[u16]); 12] = [
        (0, &[0]),
        (1, &[0, 1]),
        (2, &[1, 2]),
        (3, &[2, 3]),
        (4, &[3, 4]),
        (5, &[5]),
        (6, &[0, 5]),
        (7, &[0, 1, 5, 6]),
        (8, &[1, 2, 6, 7]),
        (9, &[2, 3, 7, 8]),
        (10, &[3, 4, 8, 9]),
        (11, &[4, 9]),
    ];
    let mut corrected = Vec::new();
    for (region, expected) in printed {
        let got = ids(&grid.region_aps(RegionId(region)).map_err(|e| e.to_string())?);
        let oracle = oracle_region_aps(5, 5, region as i32);
        ensure(got == oracle, || format!("R{region}: {got:?} differs from corner oracle {oracle:?}"))?;
        if got != expected {
            // Only a row that contradicts the corner rule may be overridden.
            let printed_set: BTreeSet<u16> = expected.iter().copied().collect();
            let regions_with_printed = grid
                .regions()
                .filter(|r| {
                    grid.region_aps(*r).map(|v| ids(&v).into_iter().collect::<BTreeSet<_>>() == printed_set) == Ok(true)
                })
                .count();
            ensure(regions_with_printed == 0 && region == 5, || {
                format!("R{region}: got {got:?}, table prints {expected:?}")
            })?;
            corrected.push(format!("R{region} printed {expected:?}, corner rule gives {got:?}"));
        }
    }

    let neighbors: [(u16, &[u16]); 5] = [
        (19, &[13, 14, 18, 23, 24]),
        (13, &[7, 8, 9, 12, 14, 17, 18, 19]),
        (21, &[15, 16, 17, 20, 22]),
        (22, &[16, 17, 18, 21, 23]),
        (15, &[10, 11, 16, 20, 21]),
    ];
    for (ap, expected) in neighbors {
        let got = ids(&grid.ap_neighbors(ApId(ap)).map_err(|e| e.to_string())?);
        ensure(got == expected, || format!("AP{ap} neighbours {got:?}, expected {expected:?}"))?;
    }

    let cases: [(u16, u16, &[u16]); 5] =
        [(19, 15, &[13]), (13, 9, &[7, 8]), (21, 18, &[15]), (15, 19, &[10, 11, 16]), (22, 25, &[16, 21])];
    for (ap, region, expected) in cases {
        let got = ids(&grid.candidate_next_aps(ApId(ap), RegionId(region)).map_err(|e| e.to_string())?);
        ensure(got == expected, || format!("S({ap}, R{region}) = {got:?}, expected {expected:?}"))?;
    }

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    let note = if corrected.is_empty() { String::new() } else { format!("; typo corrected: {}", corrected.join(", ")) };
    Ok(format!("12 rows, 5 neighbour sets, 5 candidate sets in {elapsed:?}{note}"))
}

fn criterion_accuracy_metric() -> Outcome {
    let rows: [(&str, &str, u32); 10] = [
        ("7→2→6→1", "7→1(2, 2)→6→0(1, 2)", 33),
        ("13→7→1→0→6", "13→7→1→0→5(6, 2)", 75),
        ("23→17→16→11→6", "23→17→16→11→5(6, 2)", 75),
        ("22→21→15→16", "22→21→15→10(16, 2)", 67),
        ("11→5→0", "11→5→0", 100),
        ("14→9→8→2→1→0", "14→9→8→2→1→0", 100),
        ("17→12→6→11", "17→11(12, 2)→6→11", 67),
        ("12→11→5→6", "12→11→5→0(6, 2)", 67),
        ("8→7→2→1→0", "8→7→2→1→0", 100),
        ("19→13→8→9→4→3", "19→13→8→3(9, 2)→4→3", 80),
    ];
    let mut got_all = Vec::new();
    for (i, (original, predicted, expected)) in rows.iter().enumerate() {
        let original_aps: Vec<u16> = original.split('→').map(|t| t.parse().unwrap()).collect();
        let (aps, transitions) = parse_predicted_path(predicted).map_err(|e| e.to_string())?;
        ensure(ids(&aps) == original_aps, || format!("row {}: parsed walk {:?} is not the original", i + 1, aps))?;
        let result = PathResult {
            original: MobilePath::new(original_aps.iter().map(|&a| PathStep::new(a, 0)).collect()),
            predicted: transitions,
        };
        ensure(result.predicted_path() == *predicted, || {
            format!("row {}: re-rendered as {}", i + 1, result.predicted_path())
        })?;
        let pct = accuracy_percent(path_accuracy(&result).map_err(|e| e.to_string())?);
        // Oracle: whole-percent of correct over total transitions.
        let n = original_aps.len() - 1;
        let wrong = predicted.matches('(').count();
        let oracle = (100.0 * (n - wrong) as f64 / n as f64).round() as u32;
        ensure(pct == *expected && pct == oracle, || {
            format!("row {}: {pct}% (oracle {oracle}%, table {expected}%)", i + 1)
        })?;
        got_all.push(pct);
    }
    Ok(format!("{got_all:?}"))
}

fn criterion_mining_formula() -> Outcome {
    let cfg = ScoringConfig::default();
    let mut runner = TestRunner::new(PropConfig { cases: 512, failure_persistence: None, ..PropConfig::default() });
    runner
        .run(&(0u64..1_000_000, 0u64..1_000_000), |(x1, x2)| {
            let mut db = PatternDatabase::new();
            db.set_direct(ApId(15), ApId(10), 707);
            db.set_indirect(ApId(15), ApId(11), ApId(10), x1);
            db.set_indirect(ApId(15), ApId(16), ApId(10), x2);
            let score = score_candidate(&db, ApId(15), ApId(10), &[ApId(11), ApId(16)], &cfg);
            prop_assert_eq!(score, 707.0 + 0.5 * (x1 as f64 + x2 as f64));
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let grid = GridTopology::default();
    let mut checks = Vec::new();
    for (from, region, counts, expected) in
        [(13u16, 9u16, [(7u16, 238u64), (8, 367)], 8u16), (22, 25, [(16, 162), (21, 272)], 21)]
    {
        let mut db = PatternDatabase::new();
        for (to, n) in counts {
            db.set_direct(ApId(from), ApId(to), n);
        }
        let s = grid.candidate_next_aps(ApId(from), RegionId(region)).map_err(|e| e.to_string())?;
        let p = predict_next_ap(&db, ApId(from), &s, &cfg).map_err(|e| e.to_string())?;
        ensure(p.ap == ApId(expected), || {
            format!("from {from} into R{region}: predicted {}, expected {expected}", p.ap)
        })?;
        checks.push(format!("{from}→{}", p.ap));
    }
    Ok(format!("512 proptest cases; {}", checks.join(", ")))
}

struct Sweep {
    means: Vec<BTreeMap<Scheme, f64>>,
    reports: Vec<ltdps::eval::ExperimentReport>,
    elapsed: Duration,
}

fn sweep() -> Result<Sweep, String> {
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=20).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let base = ExperimentConfig::default();
    let mut reports = Vec::new();
    for r in run_many(&base, &seeds, threads) {
        reports.push(r.map_err(|e| e.to_string())?);
    }
    let means = reports.iter().map(|rep| rep.schemes.iter().map(|s| (s.scheme, s.mean_accuracy())).collect()).collect();
    Ok(Sweep { means, reports, elapsed: start.elapsed() })
}

fn criterion_bands(sweep: &Sweep) -> Outcome {
    let n = sweep.means.len() as f64;
    let avg = |s: Scheme| 100.0 * sweep.means.iter().map(|m| m[&s]).sum::<f64>() / n;
    let (l, t, i) = (avg(Scheme::Ltdps), avg(Scheme::Tm), avg(Scheme::Ip));
    let ordered =
        sweep.means.iter().filter(|m| m[&Scheme::Ltdps] > m[&Scheme::Tm] && m[&Scheme::Ltdps] > m[&Scheme::Ip]).count();
    let detail = format!(
        "LTDPS {l:.1}%, TM {t:.1}%, IP {i:.1}%, LTDPS ahead in {ordered}/{} runs, {:.1?}",
        sweep.means.len(),
        sweep.elapsed
    );
    let ok = (60.0..=95.0).contains(&l)
        && (20.0..=60.0).contains(&t)
        && (15.0..=60.0).contains(&i)
        && ordered >= 19
        && sweep.elapsed < Duration::from_secs(60);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_rank(sweep: &Sweep) -> Outcome {
    let mut transitions = 0;
    let mut paths = 0;
    for rep in &sweep.reports {
        let ltdps = rep.scheme(Scheme::Ltdps).ok_or("LTDPS missing from report")?;
        for result in &ltdps.results {
            for t in &result.predicted {
                ensure((1..=3).contains(&t.rank), || format!("seed {}: rank {} outside 1..=3", rep.seed, t.rank))?;
                ensure((t.rank == 1) == t.correct(), || format!("seed {}: rank {} vs correctness", rep.seed, t.rank))?;
                transitions += 1;
            }
            let all_correct = result.predicted.iter().all(|t| t.predicted == t.actual);
            ensure((result.max_freq_deviation() == 1) == all_correct, || {
                format!(
                    "seed {}: max deviation {} on {}",
                    rep.seed,
                    result.max_freq_deviation(),
                    result.predicted_path()
                )
            })?;
            paths += 1;
        }
    }
    Ok(format!("{transitions} transitions over {paths} paths"))
}

fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / var
}

fn criterion_mobility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let area = Area::new(1000.0, 1000.0).map_err(|e| e.to_string())?;

    let gm = GaussMarkovParams { alpha: 1.0, ..GaussMarkovParams::default() };
    let init = KinematicState::new(500.0, 500.0, 0.7, 1.1);
    let mut s = init;
    for _ in 0..1000 {
        s = step_gauss_markov(s, &area, &gm, &mut rng);
        ensure(s.speed.to_bits() == init.speed.to_bits() && s.direction.to_bits() == init.direction.to_bits(), || {
            format!("alpha=1 drifted to speed {} direction {}", s.speed, s.direction)
        })?;
    }
    // Same check with extreme explicit draws.
    let t = gauss_markov_update(init, &area, &gm, 1e6, -1e6);
    ensure(t.speed == init.speed && t.direction == init.direction, || "alpha=1 reacted to draws".into())?;

    let gm0 = GaussMarkovParams { alpha: 0.0, ..GaussMarkovParams::default() };
    let mut s = init;
    let speeds: Vec<f64> = (0..10_000)
        .map(|_| {
            s = step_gauss_markov(s, &area, &gm0, &mut rng);
            s.speed
        })
        .collect();
    let rho = lag1_autocorrelation(&speeds);
    ensure(rho.abs() < 0.05, || format!("alpha=0 lag-1 autocorrelation {rho:.4}"))?;

    let p1 = WalkStateMatrix::p1();
    let mut counts = [[0u64; 3]; 3];
    let mut state = WalkState::Stay;
    for _ in 0..100_000 {
        let next = p1.sample_next(state, &mut rng);
        counts[state.index()][next.index()] += 1;
        state = next;
    }
    let mut worst = 0.0f64;
    for from in WalkState::ALL {
        let total: u64 = counts[from.index()].iter().sum();
        for to in WalkState::ALL {
            let freq = counts[from.index()][to.index()] as f64 / total as f64;
            worst = worst.max((freq - p1.prob(from, to)).abs());
        }
    }
    ensure(worst <= 0.02, || format!("P1 frequency off by {worst:.4}"))?;

    let small = Area::new(6.0, 6.0).map_err(|e| e.to_string())?;
    let bp = BoundlessParams { v_max: 2.5, a_max: 1.0, ..BoundlessParams::default() };
    let mut b = KinematicState::new(3.0, 3.0, 1.0, 0.3);
    for step in 0..10_000 {
        b = step_boundless(b, &small, &bp, &mut rng);
        ensure(small.contains(b.x, b.y), || format!("boundless step {step} left the area at ({}, {})", b.x, b.y))?;
        ensure((0.0..=bp.v_max).contains(&b.speed), || format!("boundless speed {} at step {step}", b.speed))?;
    }
    Ok(format!("alpha=1 exact over 1000 steps, alpha=0 rho={rho:.4}, P1 max dev {worst:.4}, boundless ok"))
}

fn criterion_security() -> Outcome {
    let cipher = CipherKind::Substitution;
    let key = SharedKey::from_hex("4b5f53412d6b6579", &cipher).map_err(|e| e.to_string())?;
    let fresh = || {
        let mn = MobileEndpoint::new(7, key.clone(), cipher);
        let mut server = ServerEndpoint::new(cipher, ChaCha8Rng::seed_from_u64(7));
        server.register(7, key.clone());
        (mn, server)
    };
    let messages = vec![b"report one".to_vec(), b"report two".to_vec()];

    let (mut mn, mut server) = fresh();
    let transcript =
        run_handshake(&mut mn, &mut server, &messages, &[], &mut CleanChannel).map_err(|e| e.to_string())?;
    ensure(transcript.entries.len() == 4 && transcript.all_accepted(), || format!("clean run:\n{transcript}"))?;

    for step in 1..=4 {
        let (mut mn, mut server) = fresh();
        let t = run_handshake(&mut mn, &mut server, &messages, &[], &mut ReplayStep::new(step))
            .map_err(|e| e.to_string())?;
        let last = t.entries.last().ok_or("empty transcript")?;
        ensure(t.entries.len() == 5 && last.verdict == Verdict::Replayed, || format!("replay of step {step}:\n{t}"))?;
    }

    // A 64-byte report: 5 header bytes, 42 payload, flag, nonce block, MIC.
    let (mut mn, mut server) = fresh();
    let first = mn.send(b"hello").map_err(|e| e.to_string())?;
    ensure(server.receive(&first.encode()).verdict == Verdict::Accepted, || "first report rejected".into())?;
    let ack = server.ack(7).map_err(|e| e.to_string())?;
    ensure(mn.receive(&ack.encode()).verdict == Verdict::Accepted, || "ack rejected".into())?;
    let packet = mn.send(&[0x5a; 42]).map_err(|e| e.to_string())?.encode();
    ensure(packet.len() == 64, || format!("packet is {} bytes", packet.len()))?;
    ensure(server.clone().receive(&packet).verdict == Verdict::Accepted, || "untouched packet rejected".into())?;
    for bit in 0..packet.len() * 8 {
        let mut flipped = packet.clone();
        flipped[bit / 8] ^= 0x80 >> (bit % 8);
        let verdict = server.clone().receive(&flipped).verdict;
        ensure(verdict == Verdict::Tampered, || format!("bit {bit} flip gave {verdict}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..1000 {
        let len = rng.gen_range(0..200);
        let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let msg_type = [MsgType::Report, MsgType::Ack, MsgType::ServerMsg][i % 3];
        let nonce = rng.gen_bool(0.5).then(|| rng.gen());
        let p =
            ltdps::security::seal(msg_type, rng.gen(), &payload, &key, nonce, &cipher).map_err(|e| e.to_string())?;
        let bytes = p.encode();
        let back = SecurePacket::decode(&bytes, 8).map_err(|e| e.to_string())?;
        ensure(back == p && back.encode() == bytes && bytes.len() == p.wire_len(), || {
            format!("round trip {i} differs")
        })?;
    }
    Ok("4 accepted, 4 replays caught, 512/512 flips tampered, 1000 round trips".into())
}

fn criterion_shared_oracle() -> Outcome {
    let cfg = ExperimentConfig::default();
    let grid = cfg.grid;
    let history = history_for(&cfg).map_err(|e| e.to_string())?;
    ensure(history.len() == 10_000, || format!("history has {} paths", history.len()))?;
    let tm = build_tm(&history, &grid).map_err(|e| e.to_string())?;
    let db = PatternDatabase::from_paths(&history, &grid).map_err(|e| e.to_string())?;
    let mut total = 0;
    for a in grid.aps() {
        for b in grid.aps() {
            let (x, y) = (tm.count(a, b), db.direct_count(a, b));
            ensure(x == y, || format!("{a}→{b}: TM {x}, miner {y}"))?;
            total += x;
        }
    }
    Ok(format!("625 cells equal, {total} transitions"))
}

fn main() -> ExitCode {
    let sweep = sweep();
    let from_sweep = |f: fn(&Sweep) -> Outcome| match &sweep {
        Ok(s) => f(s),
        Err(e) => Err(format!("experiment failed: {e}")),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("grid oracle", criterion_grid()),
        ("accuracy metric", criterion_accuracy_metric()),
        ("mining formula", criterion_mining_formula()),
        ("stochastic bands", from_sweep(criterion_bands)),
        ("frequency rank", from_sweep(criterion_rank)),
        ("mobility models", criterion_mobility()),
        ("security", criterion_security()),
        ("shared oracle", criterion_shared_oracle()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
