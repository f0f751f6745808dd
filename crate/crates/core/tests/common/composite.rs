//! Finite-difference checks of whole model graphs.

use advtag::autodiff::{Graph, Group, Var};
use advtag::data::{SOURCE_LANGUAGE, TARGET_LANGUAGE};
use advtag::model::{
    discriminator_loss_gr, gan_discriminator_loss, generator_loss, tagger_loss, wgan_discriminator_loss, Objective,
};
use advtag::parsing::parser_loss;
use rand::Rng;

use super::{check_params, random_parsed, random_tagged, rng, tiny_parser, tiny_tagger};

/// Generator into tagger: embeddings, bi-LSTM, FFN and label table.
pub fn tagger(seed: u64) -> f64 {
    let mut r = rng(seed);
    let model = tiny_tagger(Objective::None, seed);
    let s = random_tagged(&mut r, 5, SOURCE_LANGUAGE);
    check_params(
        &model.store,
        &[Group::Generator, Group::Tagger],
        |_| 1.0,
        |g| {
            let f = model.features(g, &s, None).unwrap();
            tagger_loss(g, &model, &f, &s).unwrap()
        },
    )
}

/// Generator into the transition classifier along the oracle sequence.
pub fn parser(seed: u64) -> f64 {
    let mut r = rng(seed);
    let model = tiny_parser(seed);
    let s = random_parsed(&mut r, 5);
    check_params(
        &model.store,
        &[Group::Generator, Group::Tagger],
        |_| 1.0,
        |g| {
            let f = model.features(g, &s, None).unwrap();
            parser_loss(g, &model, &f, &s).unwrap()
        },
    )
}

/// Generator through gradient reversal into the language discriminator.
/// Generator gradients must equal `-lambda` times the derivative of the
/// forward value; discriminator gradients the plain derivative.
pub fn reversed_discriminator(seed: u64) -> f64 {
    let mut r = rng(seed);
    let lambda = r.random_range(0.1..2.0);
    let model = tiny_tagger(Objective::Gr, seed);
    let src = random_tagged(&mut r, 4, SOURCE_LANGUAGE);
    let tgt = random_tagged(&mut r, 4, TARGET_LANGUAGE);
    let scale = |group| if group == Group::Generator { -lambda } else { 1.0 };
    check_params(&model.store, &[Group::Generator, Group::Discriminator], scale, |g| {
        let batch = vec![
            (model.features(g, &src, None).unwrap(), SOURCE_LANGUAGE),
            (model.features(g, &tgt, None).unwrap(), TARGET_LANGUAGE),
        ];
        discriminator_loss_gr(g, &model, &batch, lambda).unwrap().loss
    })
}

fn two_sided(
    g: &mut Graph<'_>,
    model: &advtag::model::Model,
    r: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<Vec<Var>>, Vec<Vec<Var>>) {
    let src = random_tagged(r, 4, SOURCE_LANGUAGE);
    let tgt = random_tagged(r, 4, TARGET_LANGUAGE);
    (
        vec![model.features(g, &src, None).unwrap()],
        vec![model.features(g, &tgt, None).unwrap()],
    )
}

/// GAN discriminator loss and the generator objective built on it.
pub fn gan(seed: u64) -> f64 {
    let model = tiny_tagger(Objective::Gan, seed);
    let d = check_params(
        &model.store,
        &[Group::Generator, Group::Discriminator],
        |_| 1.0,
        |g| {
            let (s, t) = two_sided(g, &model, &mut rng(seed));
            gan_discriminator_loss(g, &model, &s, &t).unwrap().loss
        },
    );
    let gen = check_params(
        &model.store,
        &Group::ALL,
        |_| 1.0,
        |g| {
            let mut r = rng(seed);
            let (s, t) = two_sided(g, &model, &mut r);
            let lab = random_tagged(&mut r, 4, SOURCE_LANGUAGE);
            let f = model.features(g, &lab, None).unwrap();
            generator_loss(g, &model, &[(&lab, f)], &s, &t, Objective::Gan)
                .unwrap()
                .0
        },
    );
    d.max(gen)
}

/// WGAN critic loss.
pub fn wgan(seed: u64) -> f64 {
    let model = tiny_tagger(Objective::Wgan, seed);
    check_params(
        &model.store,
        &[Group::Generator, Group::Discriminator],
        |_| 1.0,
        |g| {
            let (s, t) = two_sided(g, &model, &mut rng(seed));
            wgan_discriminator_loss(g, &model, &s, &t).unwrap().loss
        },
    )
}
