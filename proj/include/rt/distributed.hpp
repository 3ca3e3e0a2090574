#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rt/training.hpp"

namespace rt {

// Data-parallel training: every replica holds the full model, each batch is
// split into contiguous shards, workers send their shard gradients to the
// coordinator as frames, the coordinator reduces them by weighted mean and
// broadcasts the result, and every replica (coordinator included) applies
// the same optimizer step. All randomness is keyed by dataset index, so
// the worker count cannot change which perturbation a sample receives.

uint32_t crc32(const void* data, size_t n);

struct GradientFrame {
    uint32_t epoch = 0;
    uint32_t step = 0;       // batch index within the epoch
    uint16_t worker = 0;
    uint32_t shard_size = 0;
    std::vector<Scalar> payload;  // gradients concatenated in sorted-name order
};

// Wire layout, little endian:
//   u32 magic 0x52474431, u32 length of everything after the length field,
//   u32 epoch, u32 step, u16 worker, u32 shard size, payload scalars,
//   u32 crc32 over the bytes from epoch through the payload.
std::vector<uint8_t> serialize_frame(const GradientFrame& f);
// Distinct errors for bad magic, length mismatch, truncation, checksum.
GradientFrame parse_frame(const std::vector<uint8_t>& bytes);

// Contiguous (offset, count) spans covering 0..n-1; the first n % workers
// spans are one longer, so sizes differ by at most one.
std::vector<std::pair<int, int>> shard_spans(int n, int workers);

// One worker's contribution for one batch step. idx holds the dataset
// indices of this worker's shard; the perturbation seed of sample i is
// mix(mix(cfg.master_seed, epoch), idx[i]), exactly as in the monolithic
// loop. An empty shard yields a zero payload with shard_size 0.
GradientFrame worker_step(const Model& m, const TrainConfig& cfg, const Dataset& train,
                          uint32_t epoch, uint32_t step, uint16_t worker,
                          const std::vector<int>& idx);

// Weighted mean sum_w (n_w / batch_total) * g_w, accumulated in worker-id
// order starting from worker 0 (weight exactly 1.0 for a single worker).
// Frames must agree on (epoch, step), cover worker ids 0..W-1 exactly
// once, and their shard sizes must sum to batch_total.
std::map<std::string, Tensor> all_reduce_mean(const std::vector<GradientFrame>& frames,
                                              const Model& ref, int batch_total);

enum class Transport { inprocess, socket };
Transport parse_transport(const std::string& s);

// Self-contained run: spawns the workers itself (in-process replicas, or
// local threads speaking the TCP loopback protocol). The returned model
// comes from the coordinator replica. Train-split rows in the history
// carry no loss/accuracy (frames do not transport them).
TrainResult distributed_train(Model model, const Dataset& train, const Dataset& val,
                              const TrainConfig& cfg, int workers, Transport transport);

// Coordinator that listens on a TCP port and waits for `workers` external
// connections (see run_socket_worker).
TrainResult distributed_train_listen(Model model, const Dataset& train, const Dataset& val,
                                     const TrainConfig& cfg, int workers, int port);

// Standalone socket worker: connects to a coordinator, receives its worker
// id, then serves assignments until the coordinator finishes. The caller
// must hand it the same initial model, config and training data the
// coordinator uses.
void run_socket_worker(const std::string& host, int port, Model model, const TrainConfig& cfg,
                       const Dataset& train);

}  // namespace rt
