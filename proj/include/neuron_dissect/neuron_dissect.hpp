#ifndef NEURON_DISSECT_NEURON_DISSECT_HPP
#define NEURON_DISSECT_NEURON_DISSECT_HPP

#include "neuron_dissect/analysis.hpp"
#include "neuron_dissect/dissect.hpp"
#include "neuron_dissect/errors.hpp"
#include "neuron_dissect/matrix.hpp"
#include "neuron_dissect/pipeline.hpp"
#include "neuron_dissect/report_io.hpp"
#include "neuron_dissect/tensor_io.hpp"
#include "neuron_dissect/vocab.hpp"

#endif  // NEURON_DISSECT_NEURON_DISSECT_HPP
