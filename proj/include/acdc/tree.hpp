#ifndef ACDC_TREE_HPP
#define ACDC_TREE_HPP

#include <acdc/channel.hpp>
#include <acdc/errors.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

namespace acdc {

/// How resolution delay is counted against a deadline.
enum class delay_convention {
    /// RC slots from admission to the last resolution; the AC collision is
    /// the tree root and is not counted.
    rc_slots_from_admission,
    /// Same, plus one slot for the AC collision itself.
    root_slot_included,
};

inline const char *to_string(delay_convention c)
{
    return c == delay_convention::rc_slots_from_admission ? "rc-slots-from-admission"
                                                          : "root-slot-included";
}

inline int convention_offset(delay_convention c)
{
    return c == delay_convention::root_slot_included ? 1 : 0;
}

/// A collided user set waiting to be split.
struct tree_node {
    std::vector<user_id> users;
    int level = 0;
};

/// Breadth-first binary tree resolution of one admitted collision with m_p
/// nodes explored per slot. The frontier only ever holds collided sets; a
/// singleton branch resolves its user in the slot it appears and an empty
/// branch vanishes.
class resolution_job {
public:
    resolution_job(std::uint64_t id, std::vector<user_id> users, int m_p, std::int64_t start_slot,
                   std::int64_t deadline_slot, int estimated_multiplicity = 0)
        : id_(id), m_p_(m_p), start_slot_(start_slot), deadline_slot_(deadline_slot),
          estimated_multiplicity_(estimated_multiplicity), total_users_(users.size())
    {
        if (m_p < 1)
            throw config_error("resolution job needs m_p >= 1");
        if (users.empty())
            throw config_error("resolution job needs at least one user");
        if (users.size() == 1)
            pending_.push_back(users.front());
        else
            frontier_.push_back(tree_node{std::move(users), 0});
    }

    std::uint64_t id() const { return id_; }
    int m_p() const { return m_p_; }
    std::int64_t start_slot() const { return start_slot_; }
    std::int64_t deadline_slot() const { return deadline_slot_; }
    int estimated_multiplicity() const { return estimated_multiplicity_; }
    std::size_t total_users() const { return total_users_; }
    std::size_t resolved_count() const { return resolved_; }
    int slots_used() const { return steps_; }
    bool complete() const { return frontier_.empty() && pending_.empty(); }
    const std::deque<tree_node> &frontier() const { return frontier_; }

    /// Users still unresolved (frontier contents).
    std::vector<user_id> unresolved() const
    {
        std::vector<user_id> out(pending_.begin(), pending_.end());
        for (const auto &n : frontier_)
            out.insert(out.end(), n.users.begin(), n.users.end());
        return out;
    }

    /// Tree levels of the nodes explored in each step, for order checks.
    const std::vector<std::vector<int>> &level_log() const { return level_log_; }

    /// Explores up to m_p frontier nodes in FIFO order; children are appended
    /// at the tail. Returns the users resolved in this slot.
    template <class Rng>
    std::vector<user_id> step(Rng &rng)
    {
        static_assert(Rng::max() == UINT64_MAX, "branch bits need a 64-bit engine");
        std::vector<user_id> resolved(pending_.begin(), pending_.end());
        pending_.clear();
        std::vector<int> levels;
        const std::size_t batch = std::min<std::size_t>(std::size_t(m_p_), frontier_.size());
        for (std::size_t b = 0; b < batch; ++b) {
            tree_node node = std::move(frontier_.front());
            frontier_.pop_front();
            levels.push_back(node.level);
            tree_node left{{}, node.level + 1}, right{{}, node.level + 1};
            std::uint64_t bits = 0;
            for (std::size_t k = 0; k < node.users.size(); ++k) {
                if (k % 64 == 0)
                    bits = rng();
                ((bits >> (k % 64)) & 1U ? right : left).users.push_back(node.users[k]);
            }
            for (tree_node *child : {&left, &right}) {
                if (child->users.size() == 1)
                    resolved.push_back(child->users.front());
                else if (child->users.size() >= 2)
                    frontier_.push_back(std::move(*child));
            }
        }
        level_log_.push_back(std::move(levels));
        ++steps_;
        resolved_ += resolved.size();
        return resolved;
    }

private:
    std::uint64_t id_;
    int m_p_;
    std::int64_t start_slot_;
    std::int64_t deadline_slot_;
    int estimated_multiplicity_;
    std::size_t total_users_;
    std::size_t resolved_ = 0;
    int steps_ = 0;
    std::deque<tree_node> frontier_;
    std::vector<user_id> pending_;
    std::vector<std::vector<int>> level_log_;
};

namespace detail {

/// Number of heads among k fair coins.
template <class Rng>
int fair_split(int k, Rng &rng)
{
    static_assert(Rng::max() == UINT64_MAX, "branch bits need a 64-bit engine");
    int heads = 0;
    while (k >= 64) {
        heads += std::popcount(static_cast<std::uint64_t>(rng()));
        k -= 64;
    }
    if (k > 0)
        heads += std::popcount(static_cast<std::uint64_t>(rng()) & ((std::uint64_t{1} << k) - 1));
    return heads;
}

} // namespace detail

/// Result of a count-only tree run.
struct tree_run {
    int slots = 0;
    /// Largest frontier seen at the start of any slot.
    std::size_t max_frontier = 0;
};

/// Count-only equivalent of stepping a resolution_job until it completes.
template <class Rng>
tree_run simulate_tree(int n, int m_p, Rng &rng)
{
    if (n < 2)
        throw config_error("tree resolution needs n >= 2");
    if (m_p < 1)
        throw config_error("tree resolution needs m_p >= 1");
    std::deque<int> frontier{n};
    tree_run run;
    while (!frontier.empty()) {
        run.max_frontier = std::max(run.max_frontier, frontier.size());
        const std::size_t batch = std::min<std::size_t>(std::size_t(m_p), frontier.size());
        for (std::size_t b = 0; b < batch; ++b) {
            const int k = frontier.front();
            frontier.pop_front();
            const int heads = detail::fair_split(k, rng);
            if (heads >= 2)
                frontier.push_back(heads);
            if (k - heads >= 2)
                frontier.push_back(k - heads);
        }
        ++run.slots;
    }
    return run;
}

/// RC slots until the last of n collided users resolves with m_p parallel nodes.
template <class Rng>
int run_to_completion(int n, int m_p, Rng &rng)
{
    return simulate_tree(n, m_p, rng).slots;
}

} // namespace acdc

#endif // ACDC_TREE_HPP
