//! Measured noise never exceeds the per-ciphertext bound, and the mask flag
//! stays set, at every step of random programs.

use qfhe_core::mlwe::{gsw_encrypt_level, noise_actual};
use qfhe_core::qhe::*;
use qfhe_core::qsim::{DensityMatrix, GateLabel, GateSuperop, MaskSpec};
use qfhe_core::{Error, Preset, SeededGenerator};
use rand::Rng;

fn random_instruction(n: usize, rng: &mut SeededGenerator) -> Instruction {
    let w = rng.gen_range(0..n);
    match rng.gen_range(0..10) {
        0 => Instruction::gate(GateLabel::H, &[w]),
        1 => Instruction::gate(GateLabel::S, &[w]),
        2 => Instruction::gate(GateLabel::X, &[w]),
        3 => Instruction::gate(GateLabel::Y, &[w]),
        4 => Instruction::gate(GateLabel::Z, &[w]),
        5 if n > 1 => Instruction::gate(GateLabel::Cnot, &[w, (w + 1) % n]),
        6 if n > 1 => Instruction::gate(GateLabel::Cz, &[w, (w + 1) % n]),
        7 => {
            let mode = [MeasMode::Dephase, MeasMode::Defer, MeasMode::Weak][rng.gen_range(0..3)];
            let mode = if n >= 3 { MeasMode::Dephase } else { mode };
            Instruction::Meas { wires: vec![w], mode }
        }
        8 if n >= 3 => Instruction::Corr { z_from: 0, x_from: 1, target: 2 },
        _ => Instruction::gate(GateLabel::Z, &[w]),
    }
}

fn raw_error(ck: &ClientKeys, es: &EncryptedState, reference: &DensityMatrix) -> u64 {
    let sk = ck.key_for(es.key_id()).unwrap();
    es.primary
        .iter()
        .zip(reference.row_major())
        .flat_map(|(z, r)| [noise_actual(sk, &z.re, r.re).unwrap(), noise_actual(sk, &z.im, r.im).unwrap()])
        .max()
        .unwrap()
}

#[test]
fn fuzzed_programs_stay_within_bounds() {
    let p = Preset::toy();
    let mut rng = SeededGenerator::from_u64(0x5eed);
    let (ck, ek) = ClientKeys::generate(&p, &mut rng).unwrap();
    let sk = ck.level_key(0).unwrap().clone();
    let mut checked = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=3);
        let rho = DensityMatrix::random(n, &mut rng).unwrap();
        let es = enc_state(&sk, &rho, MaskSpec::depolarizing(0.75).unwrap(), &p, &mut rng).unwrap();
        let mut st = ProgramState::new(es);
        let mut plain = rho;
        let mut b = EncryptedBackend::new(&ek, None);
        for _ in 0..8 {
            let n_now = st.es.n_qubits;
            let step = if rng.gen_bool(0.15) {
                // Encrypted control on a random bit.
                let bit = rng.gen_range(0..2);
                let g = GateSuperop::gate(GateLabel::X, &[rng.gen_range(0..n_now)], n_now, 20).unwrap();
                let ct = gsw_encrypt_level(&sk, bit, p.gadget_log2, st.es.level(), &mut rng).unwrap();
                let cb = CBit { value_ct: ct, provenance: 0 };
                he_control(&g, &st.es, &cb, &ek).map(|es| {
                    let next = if bit == 1 { g.apply_plain(&plain).unwrap() } else { plain.clone() };
                    (ProgramState { es, ..st.clone() }, next)
                })
            } else {
                let ins = random_instruction(st.wire_map.iter().flatten().count(), &mut rng);
                b.apply(&st, &ins).map(|s| (s, eval_plain(&plain, &[ins], 20).unwrap()))
            };
            match step {
                Ok((s, next)) => {
                    st = s;
                    plain = next;
                }
                Err(Error::RefreshNeeded(_)) | Err(Error::DimensionGuard(_)) => break,
                Err(e) => panic!("{e}"),
            }
            let err = raw_error(&ck, &st.es, &plain);
            assert!(err <= st.es.noise_bound(), "measured {err} > bound {}", st.es.noise_bound());
            assert!(dec_state(&ck, &st.es).unwrap().1);
            checked += 1;
        }
    }
    assert!(checked > 3000, "only {checked} steps checked");
}
