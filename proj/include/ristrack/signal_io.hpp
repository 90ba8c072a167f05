// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/config.hpp"
#include "ristrack/inference.hpp"

#include <string>
#include <vector>

namespace ristrack
{
    // Received data for one trial: phases per slot and per RIS, y per slot and per user, plus the truth.
    struct SignalRecord
    {
        double snr_db = 0;
        double noise_power = 0;
        Trajectory truth;
        std::vector<std::vector<CVec>> phases; // [slot][ris]
        std::vector<std::vector<CVec>> y;      // [slot][user]
    };

    // Random phases every slot (no feedback), as the forward simulator would see them.
    SignalRecord simulate_signals(const ExperimentConfig &cfg, std::size_t snr_index, int trial);

    void write_signals(const std::string &path, const SignalRecord &rec);
    SignalRecord read_signals(const std::string &path);

    class StoredSource final : public SignalSource
    {
    public:
        explicit StoredSource(const SignalRecord &rec) : rec_(rec) {}
        CVec signal(int user, int slot, std::span<const CVec> phases) override;

    private:
        const SignalRecord &rec_;
    };
}
