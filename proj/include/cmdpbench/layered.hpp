#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmdpbench {

// Loop-free layered state space: X_0 .. X_L with |X_0| = |X_L| = 1 and
// transitions only between consecutive layers. Global state ids are assigned
// in layer order, so each layer is a contiguous id range. Pair and triple
// vectors used throughout the library are laid out as:
//   pair id   (x,a)      -> x * A + a
//   triple id (x,a,x')   -> triple_base(x,a) + index of x' within its layer
class LayeredStateSpace {
 public:
  LayeredStateSpace(std::vector<std::vector<std::string>> layer_names, int action_count)
      : action_count_(action_count) {
    if (layer_names.size() < 2) throw std::invalid_argument("need at least two layers");
    if (layer_names.front().size() != 1 || layer_names.back().size() != 1)
      throw std::invalid_argument("first and last layers must be singletons");
    if (action_count < 1) throw std::invalid_argument("need at least one action");
    int id = 0;
    for (std::size_t k = 0; k < layer_names.size(); ++k) {
      layer_first_.push_back(id);
      for (auto& name : layer_names[k]) {
        if (name.empty()) throw std::invalid_argument("empty state name");
        names_.push_back(std::move(name));
        layer_of_.push_back(static_cast<int>(k));
        ++id;
      }
      layer_size_.push_back(id - layer_first_.back());
    }
    // Triple layout: contiguous successor block per (x,a).
    triple_base_.assign(names_.size() * action_count_, -1);
    int off = 0;
    for (int x = 0; x < num_states(); ++x) {
      int k = layer_of_[x];
      if (k == horizon()) continue;
      for (int a = 0; a < action_count_; ++a) {
        triple_base_[x * action_count_ + a] = off;
        off += layer_size_[k + 1];
      }
    }
    num_triples_ = off;
  }

  static std::shared_ptr<const LayeredStateSpace> make(std::vector<int> layer_sizes,
                                                       int action_count) {
    std::vector<std::vector<std::string>> names;
    for (std::size_t k = 0; k < layer_sizes.size(); ++k) {
      std::vector<std::string> layer;
      for (int i = 0; i < layer_sizes[k]; ++i)
        layer.push_back("s" + std::to_string(k) + "_" + std::to_string(i));
      names.push_back(std::move(layer));
    }
    return std::make_shared<const LayeredStateSpace>(std::move(names), action_count);
  }

  int num_states() const { return static_cast<int>(names_.size()); }
  int num_actions() const { return action_count_; }
  int num_layers() const { return static_cast<int>(layer_size_.size()); }
  int horizon() const { return num_layers() - 1; }  // L
  int num_pairs() const { return num_states() * action_count_; }
  int num_triples() const { return num_triples_; }

  int layer_of(int x) const { return layer_of_[x]; }
  int layer_first(int k) const { return layer_first_[k]; }
  int layer_size(int k) const { return layer_size_[k]; }
  int start_state() const { return layer_first_[0]; }
  int terminal_state() const { return layer_first_[num_layers() - 1]; }
  const std::string& name(int x) const { return names_[x]; }

  int state_by_name(const std::string& n) const {
    for (int x = 0; x < num_states(); ++x)
      if (names_[x] == n) return x;
    throw std::invalid_argument("unknown state name: " + n);
  }

  int pair_id(int x, int a) const { return x * action_count_ + a; }

  // -1 for states in the terminal layer.
  int triple_base(int x, int a) const { return triple_base_[x * action_count_ + a]; }

  // Number of successors of (x,a): size of the next layer.
  int succ_count(int x) const {
    int k = layer_of_[x];
    return k == horizon() ? 0 : layer_size_[k + 1];
  }

  int triple_id(int x, int a, int succ_index) const { return triple_base(x, a) + succ_index; }

  // Successor state of (x,a) at local index j.
  int succ_state(int x, int j) const { return layer_first_[layer_of_[x] + 1] + j; }

  // Local index of x' within its layer (x' must be in layer k(x)+1).
  int succ_index(int x, int xp) const { return xp - layer_first_[layer_of_[x] + 1]; }

 private:
  int action_count_;
  std::vector<std::string> names_;
  std::vector<int> layer_of_;
  std::vector<int> layer_first_;
  std::vector<int> layer_size_;
  std::vector<int> triple_base_;
  int num_triples_ = 0;
};

using SpacePtr = std::shared_ptr<const LayeredStateSpace>;

}  // namespace cmdpbench
